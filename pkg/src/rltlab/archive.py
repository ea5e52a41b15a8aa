"""Benchmark archives: manifests, trace persistence, resumable runs.

An archive directory holds one JSON trace per (instance, rule) pair plus
aggregated CSVs: traces.csv, features.csv and excluded.csv.  Reruns skip
pairs whose trace file already exists, so long batches are resumable and
a completed archive is idempotent.  All files are written with
deterministic ordering and repr() floats, which makes pseudo-time runs
byte-reproducible.
"""

from __future__ import annotations

import csv
import json
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from .engine import SolveLimits, SolveTrace, solve
from .features import FEATURE_NAMES, extract_report
from .learn import DataRow, Dataset
from .model import Problem, parse_problem, render_problem
from .pace import lb_pace, normalize, ranks
from .rules import ALL_RULES, RuleId


def _fmt(x) -> str:
    if x is None:
        return ""
    return repr(float(x))


@dataclass(frozen=True)
class ManifestRow:
    path: str
    instance: str
    family: str


def write_instances(problems: list[Problem], out_dir: str,
                    names: list[str] | None = None) -> str:
    """Write .po files plus manifest.csv; returns the manifest path."""
    os.makedirs(os.path.join(out_dir, "instances"), exist_ok=True)
    rows = []
    counters: dict[str, int] = {}
    for k, p in enumerate(problems):
        if names is not None:
            name = names[k]
        else:
            i = counters.get(p.family, 0)
            counters[p.family] = i + 1
            name = f"{p.family or 'instance'}-{i:03d}"
        rel = os.path.join("instances", name + ".po")
        with open(os.path.join(out_dir, rel), "w") as fh:
            fh.write(render_problem(p))
        rows.append(ManifestRow(rel, name, p.family))
    manifest = os.path.join(out_dir, "manifest.csv")
    with open(manifest, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["path", "instance", "family"])
        for r in rows:
            w.writerow([r.path, r.instance, r.family])
    return manifest


def read_manifest(manifest_path: str) -> list[ManifestRow]:
    base = os.path.dirname(manifest_path)
    rows = []
    with open(manifest_path, newline="") as fh:
        for rec in csv.DictReader(fh):
            path = rec["path"]
            if not os.path.isabs(path):
                path = os.path.join(base, path)
            if not os.path.exists(path):
                raise FileNotFoundError(f"instance file missing: {path}")
            rows.append(ManifestRow(path, rec["instance"], rec["family"]))
    return rows


def load_problem(row: ManifestRow) -> Problem:
    with open(row.path) as fh:
        return parse_problem(fh.read(), family=row.family)


def trace_to_obj(trace: SolveTrace) -> dict:
    return {
        "instance": trace.instance,
        "family": trace.family,
        "rule": trace.rule.value,
        "status": trace.status,
        "wall_time": trace.wall_time,
        "lb_init": trace.lb_init,
        "lb_fin": trace.lb_fin,
        "ub_fin": trace.ub_fin,
        "ub_init": trace.ub_init,
        "nodes": trace.nodes_processed,
        "lb_history": [[t, v] for t, v in trace.lb_history],
    }


def trace_from_obj(obj: dict) -> SolveTrace:
    return SolveTrace(
        rule=RuleId.from_name(obj["rule"]),
        lb_init=obj["lb_init"],
        lb_history=tuple((t, v) for t, v in obj["lb_history"]),
        lb_fin=obj["lb_fin"],
        ub_fin=obj["ub_fin"],
        status=obj["status"],
        nodes_processed=obj["nodes"],
        wall_time=obj["wall_time"],
        ub_init=obj.get("ub_init"),
        instance=obj["instance"],
        family=obj["family"],
    )


def _trace_path(archive_dir: str, instance: str, rule: RuleId) -> str:
    return os.path.join(archive_dir, "traces", f"{instance}__{rule.value}.json")


def _solve_pair(args) -> dict:
    path, instance, family, rule_name, limits, clock = args
    with open(path) as fh:
        problem = parse_problem(fh.read(), family=family)
    trace = solve(problem, RuleId.from_name(rule_name), limits, clock=clock)
    obj = trace_to_obj(trace)
    obj["instance"] = instance
    obj["family"] = family
    return obj


@dataclass(frozen=True)
class BenchArchive:
    directory: str
    traces: dict[tuple[str, RuleId], SolveTrace]     # retained instances only
    features: dict[str, np.ndarray]
    families: dict[str, str]
    excluded: dict[str, str]                          # instance -> reason

    def instances(self) -> list[str]:
        return sorted(self.families)

    def paces(self, instance: str) -> dict[RuleId, float]:
        return {r: lb_pace(self.traces[(instance, r)]) for r in ALL_RULES}

    def to_dataset(self) -> Dataset:
        rows = []
        for inst in self.instances():
            targets = normalize(self.paces(inst))
            rows.append(DataRow(
                instance=inst,
                family=self.families[inst],
                features=self.features[inst],
                targets=targets,
            ))
        return Dataset(tuple(rows))


def run_bench(manifest_path: str, archive_dir: str,
              limits: SolveLimits = SolveLimits(),
              clock: str = "nodes", workers: int | None = None,
              log=print) -> BenchArchive:
    """Solve every (instance, rule) pair, skipping completed trace files.

    Instances solved at the root node are excluded from the archive (the
    branching rule plays no role there); failures are logged per instance
    and do not stop the run.
    """
    rows = read_manifest(manifest_path)
    os.makedirs(os.path.join(archive_dir, "traces"), exist_ok=True)
    if workers is None:
        workers = int(os.environ.get("RLTLAB_WORKERS", "1"))

    pending = []
    for row in rows:
        for rule in ALL_RULES:
            if not os.path.exists(_trace_path(archive_dir, row.instance, rule)):
                pending.append((row.path, row.instance, row.family, rule.value, limits, clock))
    if pending:
        log(f"solving {len(pending)} (instance, rule) pairs with {workers} worker(s)")
    failures: dict[str, str] = {}
    if workers > 1 and pending:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_solve_pair, pending, chunksize=1))
    else:
        results = []
        for args in pending:
            try:
                results.append(_solve_pair(args))
            except Exception as exc:  # per-instance failure, run continues
                failures[args[1]] = f"{type(exc).__name__}: {exc}"
                log(f"FAILED {args[1]} [{args[3]}]: {exc}")
    for obj in results:
        path = _trace_path(archive_dir, obj["instance"], RuleId.from_name(obj["rule"]))
        with open(path, "w") as fh:
            fh.write(json.dumps(obj, sort_keys=True))

    # assemble: load every pair, exclude root-solved / failed instances
    traces: dict[tuple[str, RuleId], SolveTrace] = {}
    features: dict[str, np.ndarray] = {}
    families: dict[str, str] = {}
    excluded: dict[str, str] = dict(failures)
    for row in rows:
        if row.instance in excluded:
            continue
        per_rule = {}
        for rule in ALL_RULES:
            path = _trace_path(archive_dir, row.instance, rule)
            if not os.path.exists(path):
                excluded[row.instance] = "incomplete rule coverage"
                break
            with open(path) as fh:
                per_rule[rule] = trace_from_obj(json.load(fh))
        else:
            if any(t.root_solved for t in per_rule.values()):
                excluded[row.instance] = "solved at the root node"
                continue
            fv, _ = extract_report(load_problem(row))
            families[row.instance] = row.family
            features[row.instance] = fv.as_array()
            for rule, t in per_rule.items():
                traces[(row.instance, rule)] = t
    for inst, reason in sorted(excluded.items()):
        log(f"excluded {inst}: {reason}")

    archive = BenchArchive(archive_dir, traces, features, families, excluded)
    save_archive_csvs(archive)
    return archive


def save_archive_csvs(archive: BenchArchive):
    with open(os.path.join(archive.directory, "traces.csv"), "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["instance", "family", "rule", "status", "wall_time",
                    "lb_init", "lb_fin", "ub_fin", "nodes", "lb_history"])
        for inst in archive.instances():
            for rule in ALL_RULES:
                t = archive.traces[(inst, rule)]
                hist = "|".join(f"{_fmt(a)}:{_fmt(b)}" for a, b in t.lb_history)
                w.writerow([inst, archive.families[inst], rule.value, t.status,
                            _fmt(t.wall_time), _fmt(t.lb_init), _fmt(t.lb_fin),
                            _fmt(t.ub_fin), t.nodes_processed, hist])
    with open(os.path.join(archive.directory, "features.csv"), "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["instance", "family"] + list(FEATURE_NAMES))
        for inst in archive.instances():
            w.writerow([inst, archive.families[inst]]
                       + [_fmt(v) for v in archive.features[inst]])
    with open(os.path.join(archive.directory, "excluded.csv"), "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["instance", "reason"])
        for inst, reason in sorted(archive.excluded.items()):
            w.writerow([inst, reason])


def load_archive(archive_dir: str) -> BenchArchive:
    """Rebuild an archive object from its trace files and features.csv."""
    features: dict[str, np.ndarray] = {}
    families: dict[str, str] = {}
    with open(os.path.join(archive_dir, "features.csv"), newline="") as fh:
        for rec in csv.DictReader(fh):
            families[rec["instance"]] = rec["family"]
            features[rec["instance"]] = np.array([float(rec[k]) for k in FEATURE_NAMES])
    excluded: dict[str, str] = {}
    exc_path = os.path.join(archive_dir, "excluded.csv")
    if os.path.exists(exc_path):
        with open(exc_path, newline="") as fh:
            for rec in csv.DictReader(fh):
                excluded[rec["instance"]] = rec["reason"]
    traces: dict[tuple[str, RuleId], SolveTrace] = {}
    for inst in families:
        for rule in ALL_RULES:
            with open(_trace_path(archive_dir, inst, rule)) as fh:
                traces[(inst, rule)] = trace_from_obj(json.load(fh))
    return BenchArchive(archive_dir, traces, features, families, excluded)


def write_pace_table(archive: BenchArchive, out_path: str):
    with open(out_path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["instance", "family", "rule", "status", "time",
                    "lb_init", "lb_fin", "pace", "normalized", "rank"])
        for inst in archive.instances():
            paces = archive.paces(inst)
            norm = normalize(paces)
            rk = ranks(paces)
            for rule in ALL_RULES:
                t = archive.traces[(inst, rule)]
                w.writerow([inst, archive.families[inst], rule.value, t.status,
                            _fmt(t.wall_time), _fmt(t.lb_init), _fmt(t.lb_fin),
                            _fmt(paces[rule]), _fmt(norm[rule]), rk[rule]])
