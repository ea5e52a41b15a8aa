"""Command-line entry points.

Verbs: generate, features, solve, bench, train, select, report.
Exit codes: 0 success, 1 usage error, 2 data error.  A config file
(JSON, via --config) can pre-seed any long flag; explicit flags win.
The RLTLAB_WORKERS environment variable sets the bench worker count.
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import sys

from .archive import (
    load_archive,
    load_problem,
    read_manifest,
    run_bench,
    trace_to_obj,
    write_instances,
)
from .engine import ProblemInfeasibleError, SolveLimits, solve
from .features import FEATURE_NAMES, extract_report
from .learn import QrfParams, select_rule, selector_from_json
from .model import GenSpec, ParseError, parse_problem
from .report import train_and_evaluate, write_report_bundle, write_train_report
from .rlt import InstanceTooLargeError
from .rules import RuleId
from .suite import REGIME_FAMILIES, random_suite, regimes_suite


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        sys.stderr.write(f"error: {message}\n")
        sys.exit(1)


class DataError(Exception):
    pass


def _limits(args) -> SolveLimits:
    return SolveLimits(time_limit=args.time_limit, max_nodes=args.max_nodes,
                       gap_tol=args.gap_tol)


def _add_limit_flags(p):
    p.add_argument("--time-limit", type=float, default=60.0)
    p.add_argument("--max-nodes", type=int, default=1_000_000)
    p.add_argument("--gap-tol", type=float, default=1e-4)
    p.add_argument("--clock", choices=("wall", "nodes"), default="wall",
                   help="'nodes' counts processed nodes as pseudo-time (reproducible)")


def cmd_generate(args):
    if args.suite == "regimes":
        problems = regimes_suite(per_family=args.per_family, master_seed=args.seed)
    else:
        problems = random_suite(args.count, GenSpec(
            n=args.n, degree=args.degree, density=args.density,
            n_constraints=args.constraints, eq_fraction=args.eq_fraction,
            seed=args.seed), family=args.family)
    manifest = write_instances(problems, args.out)
    print(f"wrote {len(problems)} instances; manifest: {manifest}")


def cmd_features(args):
    rows = read_manifest(args.manifest)
    with open(args.out, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["instance", "family"] + list(FEATURE_NAMES))
        for row in rows:
            fv, warnings = extract_report(load_problem(row))
            for msg in warnings:
                print(f"note [{row.instance}]: {msg}", file=sys.stderr)
            w.writerow([row.instance, row.family] + [repr(v) for v in fv.values])
    print(f"wrote features for {len(rows)} instances to {args.out}")


def cmd_solve(args):
    with open(args.instance) as fh:
        problem = parse_problem(fh.read())
    rule = RuleId.from_name(args.rule)
    try:
        trace = solve(problem, rule, _limits(args), clock=args.clock)
    except ProblemInfeasibleError as exc:
        raise DataError(f"infeasible problem: {exc}") from exc
    print(f"status={trace.status} lb={trace.lb_fin!r} "
          f"ub={'' if trace.ub_fin is None else repr(trace.ub_fin)} "
          f"nodes={trace.nodes_processed} time={trace.wall_time!r}")
    if args.out:
        obj = trace_to_obj(trace)
        obj["instance"] = os.path.basename(args.instance)
        with open(args.out, "w") as fh:
            fh.write(json.dumps(obj, sort_keys=True))


def cmd_bench(args):
    archive = run_bench(args.manifest, args.out, _limits(args), clock=args.clock,
                        workers=args.workers)
    n_pairs = len(archive.traces)
    print(f"archive at {args.out}: {len(archive.families)} instances "
          f"({n_pairs} traces), {len(archive.excluded)} excluded")


def cmd_train(args):
    archive = load_archive(args.archive)
    params = QrfParams(trees=args.trees, min_leaf=args.min_leaf)
    report = train_and_evaluate(
        archive, tau=args.tau, partitions=args.partitions,
        master_seed=args.seed, params=params, selector_dir=args.out,
    )
    write_train_report(report, args.out)
    print(f"best single rule: {report.best_rule.value} ({report.best_single!r})")
    print(f"learned rule:     {report.avg_ml!r} "
          f"({100 * report.ml_improvement:.1f}% improvement)")
    print(f"optimal rule:     {report.avg_optimal!r} "
          f"({100 * report.optimal_improvement:.1f}% improvement)")
    print(f"out-of-bag:       ml {report.oob_ml!r} "
          f"({100 * report.oob_ml_improvement:.1f}% vs {report.oob_best_rule.value})")


def cmd_select(args):
    with open(args.selector) as fh:
        selector = selector_from_json(fh.read())
    with open(args.instance) as fh:
        problem = parse_problem(fh.read())
    fv, _ = extract_report(problem)
    print(select_rule(selector, fv).value)


def cmd_report(args):
    archive = load_archive(args.archive)
    selector = None
    if args.selector:
        with open(args.selector) as fh:
            selector = selector_from_json(fh.read())
    write_report_bundle(archive, args.out, selector=selector, svg=args.svg)
    print(f"report bundle written to {args.out}")


def build_parser() -> _Parser:
    parser = _Parser(prog="rltlab", description=__doc__)
    parser.add_argument("--config", help="JSON file pre-seeding flag values")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("generate", help="generate a benchmark suite")
    p.add_argument("--suite", choices=("regimes", "random"), default="regimes")
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--per-family", type=int, default=40,
                   help=f"instances per family for the regimes suite {REGIME_FAMILIES}")
    p.add_argument("--count", type=int, default=20, help="instances for --suite random")
    p.add_argument("--n", type=int, default=4)
    p.add_argument("--degree", type=int, default=2)
    p.add_argument("--density", type=float, default=0.6)
    p.add_argument("--constraints", type=int, default=3)
    p.add_argument("--eq-fraction", type=float, default=0.0)
    p.add_argument("--family", default="random")
    p.set_defaults(fn=cmd_generate)

    p = sub.add_parser("features", help="extract instance features to CSV")
    p.add_argument("--manifest", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(fn=cmd_features)

    p = sub.add_parser("solve", help="solve one instance with one rule")
    p.add_argument("--instance", required=True)
    p.add_argument("--rule", required=True,
                   help="|".join(r.value for r in RuleId))
    p.add_argument("--out", help="write the trace as JSON")
    _add_limit_flags(p)
    p.set_defaults(fn=cmd_solve)

    p = sub.add_parser("bench", help="solve every (instance, rule) pair")
    p.add_argument("--manifest", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--workers", type=int, default=None,
                   help="defaults to RLTLAB_WORKERS or 1")
    _add_limit_flags(p)
    p.set_defaults(fn=cmd_bench, clock="nodes")

    p = sub.add_parser("train", help="train the rule selector on an archive")
    p.add_argument("--archive", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--tau", type=float, default=0.3)
    p.add_argument("--partitions", type=int, default=10)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--trees", type=int, default=500)
    p.add_argument("--min-leaf", type=int, default=5)
    p.set_defaults(fn=cmd_train)

    p = sub.add_parser("select", help="pick a branching rule for an instance")
    p.add_argument("--selector", required=True)
    p.add_argument("--instance", required=True)
    p.set_defaults(fn=cmd_select)

    p = sub.add_parser("report", help="emit analytics CSVs (and SVGs)")
    p.add_argument("--archive", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--selector")
    p.add_argument("--svg", action="store_true")
    p.set_defaults(fn=cmd_report)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    pre, _ = _Parser(add_help=False).parse_known_args(argv) if False else (None, None)
    args = parser.parse_args(argv)
    if args.config:
        try:
            with open(args.config) as fh:
                defaults = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            print(f"error: bad config file: {exc}", file=sys.stderr)
            return 2
        parser.set_defaults(**{k.replace("-", "_"): v for k, v in defaults.items()})
        args = parser.parse_args(argv)  # explicit flags win over config values
    try:
        args.fn(args)
    except (ParseError, DataError, InstanceTooLargeError, FileNotFoundError,
            ValueError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
