"""Training evaluation and analytics bundles.

`train_and_evaluate` reproduces the benchmark protocol: several stratified
train/test partitions, one selector per partition, and a summary
comparing the learned rule against the best single rule and the
instance-wise optimal rule, plus an out-of-bag variant on the full
dataset.  `write_report_bundle` emits the underlying data of the usual
analytics: normalized-pace distributions, rank shares, selection
frequencies, feature importances and performance profiles, with optional
SVG renderings.
"""

from __future__ import annotations

import csv
import json
import os
from dataclasses import dataclass

import numpy as np

from .archive import BenchArchive, write_pace_table, _fmt
from .features import FEATURE_NAMES
from .learn import (
    Dataset,
    QrfParams,
    Selector,
    feature_importance,
    oob_predict,
    select_rule,
    selector_to_json,
    stratified_split,
    train_selector,
)
from .pace import geo_mean, normalize, performance_profile, ranks
from .rules import ALL_RULES, RuleId


@dataclass(frozen=True)
class PartitionResult:
    seed: int
    per_rule: dict[RuleId, float]    # test geo-mean pace per fixed rule
    ml: float                        # test geo-mean pace of the learned rule
    optimal: float                   # test geo-mean of the instance-best rule
    picks: dict[str, RuleId]         # learned choice per test instance


@dataclass(frozen=True)
class TrainReport:
    partitions: tuple[PartitionResult, ...]
    avg_per_rule: dict[RuleId, float]
    best_rule: RuleId
    best_single: float
    avg_ml: float
    avg_optimal: float
    ml_improvement: float            # vs best single rule
    optimal_improvement: float
    oob_per_rule: dict[RuleId, float]
    oob_best_rule: RuleId
    oob_best_single: float
    oob_ml: float
    oob_optimal: float
    oob_ml_improvement: float
    oob_optimal_improvement: float
    oob_picks: dict[str, RuleId]


def _geo_pace_of_picks(archive: BenchArchive, picks: dict[str, RuleId]) -> float:
    return geo_mean([archive.paces(inst)[rule] for inst, rule in picks.items()])


def _optimal_picks(archive: BenchArchive, instances) -> dict[str, RuleId]:
    out = {}
    for inst in instances:
        paces = archive.paces(inst)
        out[inst] = min(ALL_RULES, key=lambda r: (paces[r], r.order))
    return out


def train_and_evaluate(archive: BenchArchive, tau: float = 0.3, partitions: int = 10,
                       master_seed: int = 0, params: QrfParams = QrfParams(),
                       ratio: float = 0.7, selector_dir: str | None = None,
                       log=print) -> TrainReport:
    dataset = archive.to_dataset()
    results: list[PartitionResult] = []
    for p in range(partitions):
        seed = master_seed * 1000 + p
        train, test = stratified_split(dataset, ratio=ratio, seed=seed)
        selector = train_selector(train, tau=tau, params=params, master_seed=seed)
        if selector_dir is not None:
            os.makedirs(selector_dir, exist_ok=True)
            with open(os.path.join(selector_dir, f"selector-p{p:02d}.json"), "w") as fh:
                fh.write(selector_to_json(selector))
        test_ids = [row.instance for row in test.rows]
        picks = {row.instance: select_rule(selector, row.features) for row in test.rows}
        per_rule = {r: geo_mean([archive.paces(i)[r] for i in test_ids]) for r in ALL_RULES}
        ml = _geo_pace_of_picks(archive, picks)
        optimal = _geo_pace_of_picks(archive, _optimal_picks(archive, test_ids))
        results.append(PartitionResult(seed, per_rule, ml, optimal, picks))
        log(f"partition {p}: ml {ml:.3f} optimal {optimal:.3f} "
            f"best-rule {min(per_rule.values()):.3f}")

    avg_per_rule = {r: float(np.mean([res.per_rule[r] for res in results])) for r in ALL_RULES}
    best_rule = min(ALL_RULES, key=lambda r: (avg_per_rule[r], r.order))
    best_single = avg_per_rule[best_rule]
    avg_ml = float(np.mean([res.ml for res in results]))
    avg_optimal = float(np.mean([res.optimal for res in results]))

    # out-of-bag variant on the full dataset
    full_selector = train_selector(dataset, tau=tau, params=params, master_seed=master_seed)
    if selector_dir is not None:
        with open(os.path.join(selector_dir, "selector-full.json"), "w") as fh:
            fh.write(selector_to_json(full_selector))
    x = dataset.feature_matrix()
    oob_preds = {r: oob_predict(full_selector.models[r], x, tau) for r in ALL_RULES}
    oob_picks: dict[str, RuleId] = {}
    for i, row in enumerate(dataset.rows):
        best, best_v = None, None
        for r in ALL_RULES:
            v = oob_preds[r][i]
            if v is None:
                continue
            if best_v is None or v > best_v:
                best, best_v = r, v
        if best is None:
            log(f"no out-of-bag trees for {row.instance}; skipped")
            continue
        oob_picks[row.instance] = best
    all_ids = [row.instance for row in dataset.rows]
    oob_per_rule = {r: geo_mean([archive.paces(i)[r] for i in all_ids]) for r in ALL_RULES}
    oob_best_rule = min(ALL_RULES, key=lambda r: (oob_per_rule[r], r.order))
    oob_best = oob_per_rule[oob_best_rule]
    oob_ml = _geo_pace_of_picks(archive, oob_picks)
    oob_optimal = _geo_pace_of_picks(archive, _optimal_picks(archive, all_ids))

    return TrainReport(
        partitions=tuple(results),
        avg_per_rule=avg_per_rule,
        best_rule=best_rule,
        best_single=best_single,
        avg_ml=avg_ml,
        avg_optimal=avg_optimal,
        ml_improvement=(best_single - avg_ml) / best_single,
        optimal_improvement=(best_single - avg_optimal) / best_single,
        oob_per_rule=oob_per_rule,
        oob_best_rule=oob_best_rule,
        oob_best_single=oob_best,
        oob_ml=oob_ml,
        oob_optimal=oob_optimal,
        oob_ml_improvement=(oob_best - oob_ml) / oob_best,
        oob_optimal_improvement=(oob_best - oob_optimal) / oob_best,
        oob_picks=oob_picks,
    )


def write_train_report(report: TrainReport, out_dir: str):
    os.makedirs(out_dir, exist_ok=True)
    with open(os.path.join(out_dir, "partitions.csv"), "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["partition_seed"] + [r.value for r in ALL_RULES] + ["ml", "optimal"])
        for res in report.partitions:
            w.writerow([res.seed] + [_fmt(res.per_rule[r]) for r in ALL_RULES]
                       + [_fmt(res.ml), _fmt(res.optimal)])
    summary = {
        "test_sets": {
            "per_rule_avg_geo_pace": {r.value: report.avg_per_rule[r] for r in ALL_RULES},
            "best_rule": report.best_rule.value,
            "best_single": report.best_single,
            "ml": report.avg_ml,
            "optimal": report.avg_optimal,
            "ml_improvement": report.ml_improvement,
            "optimal_improvement": report.optimal_improvement,
        },
        "out_of_bag": {
            "per_rule_geo_pace": {r.value: report.oob_per_rule[r] for r in ALL_RULES},
            "best_rule": report.oob_best_rule.value,
            "best_single": report.oob_best_single,
            "ml": report.oob_ml,
            "optimal": report.oob_optimal,
            "ml_improvement": report.oob_ml_improvement,
            "optimal_improvement": report.oob_optimal_improvement,
        },
    }
    with open(os.path.join(out_dir, "summary.json"), "w") as fh:
        fh.write(json.dumps(summary, sort_keys=True, indent=2))


# ---------------------------------------------------------------------------
# Figure-data bundle
# ---------------------------------------------------------------------------


def _normalized_by_instance(archive: BenchArchive) -> dict[str, dict[RuleId, float]]:
    return {inst: normalize(archive.paces(inst)) for inst in archive.instances()}


def write_report_bundle(archive: BenchArchive, out_dir: str,
                        selector: Selector | None = None,
                        oob_picks: dict[str, RuleId] | None = None,
                        svg: bool = False):
    os.makedirs(out_dir, exist_ok=True)
    norm = _normalized_by_instance(archive)
    instances = archive.instances()

    write_pace_table(archive, os.path.join(out_dir, "pace_table.csv"))

    # normalized-pace distribution per rule (boxplot quartiles)
    with open(os.path.join(out_dir, "normalized_pace_summary.csv"), "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["rule", "min", "q1", "median", "q3", "max"])
        for rule in ALL_RULES:
            xs = np.array([norm[i][rule] for i in instances])
            qs = np.quantile(xs, [0.0, 0.25, 0.5, 0.75, 1.0])
            w.writerow([rule.value] + [_fmt(v) for v in qs])

    # rank shares and the mean normalized pace inside each rank cell
    rank_share = {r: [0] * len(ALL_RULES) for r in ALL_RULES}
    rank_norm: dict[RuleId, list[list[float]]] = {r: [[] for _ in ALL_RULES] for r in ALL_RULES}
    for inst in instances:
        rk = ranks(archive.paces(inst))
        for rule in ALL_RULES:
            rank_share[rule][rk[rule] - 1] += 1
            rank_norm[rule][rk[rule] - 1].append(norm[inst][rule])
    with open(os.path.join(out_dir, "rank_table.csv"), "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["rule", "rank", "share", "mean_normalized_pace"])
        for rule in ALL_RULES:
            for k in range(len(ALL_RULES)):
                share = rank_share[rule][k] / len(instances)
                cell = rank_norm[rule][k]
                w.writerow([rule.value, k + 1, _fmt(share),
                            _fmt(float(np.mean(cell))) if cell else ""])

    # selection frequencies: learned rule vs instance-wise optimal
    if selector is not None or oob_picks is not None:
        if oob_picks is not None:
            picks = oob_picks
        else:
            picks = {inst: select_rule(selector, archive.features[inst]) for inst in instances}
        counts_ml = {r: 0 for r in ALL_RULES}
        counts_opt = {r: 0 for r in ALL_RULES}
        for inst in instances:
            if inst in picks:
                counts_ml[picks[inst]] += 1
            paces = archive.paces(inst)
            counts_opt[min(ALL_RULES, key=lambda r: (paces[r], r.order))] += 1
        with open(os.path.join(out_dir, "selection_frequency.csv"), "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["rule", "ml_share", "optimal_share"])
            for rule in ALL_RULES:
                w.writerow([rule.value, _fmt(counts_ml[rule] / len(instances)),
                            _fmt(counts_opt[rule] / len(instances))])

    # per-rule feature importances
    if selector is not None:
        with open(os.path.join(out_dir, "feature_importance.csv"), "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["rule"] + list(FEATURE_NAMES))
            for rule in ALL_RULES:
                imp = feature_importance(selector.models[rule])
                w.writerow([rule.value] + [_fmt(v) for v in imp])

    # performance profiles on the pace KPI
    records = {inst: archive.paces(inst) for inst in instances}
    points = performance_profile(records)
    with open(os.path.join(out_dir, "performance_profile.csv"), "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["rule", "tau", "rho"])
        for pt in points:
            w.writerow([pt.rule.value, _fmt(pt.tau), _fmt(pt.rho)])

    if svg:
        _render_profile_svg(points, os.path.join(out_dir, "performance_profile.svg"))
        _render_rank_svg(rank_share, len(instances), os.path.join(out_dir, "rank_bars.svg"))


_SVG_COLORS = ("#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b")


def _render_profile_svg(points, path, width=640, height=420, margin=50):
    by_rule: dict[RuleId, list] = {}
    for pt in points:
        by_rule.setdefault(pt.rule, []).append(pt)
    taus = sorted({pt.tau for pt in points})
    if not taus:
        return
    tmax = max(taus[-1], 1.0 + 1e-9)
    lines = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}">',
             f'<rect width="{width}" height="{height}" fill="white"/>']

    def sx(tau):
        return margin + (np.log(tau) / np.log(tmax)) * (width - 2 * margin) if tmax > 1 else margin

    def sy(rho):
        return height - margin - rho * (height - 2 * margin)

    lines.append(f'<line x1="{margin}" y1="{height-margin}" x2="{width-margin}" '
                 f'y2="{height-margin}" stroke="black"/>')
    lines.append(f'<line x1="{margin}" y1="{margin}" x2="{margin}" '
                 f'y2="{height-margin}" stroke="black"/>')
    for k, rule in enumerate(sorted(by_rule, key=lambda r: r.order)):
        pts = sorted(by_rule[rule], key=lambda p: p.tau)
        coords = []
        prev_rho = 0.0
        for pt in pts:
            coords.append((sx(pt.tau), sy(prev_rho)))
            coords.append((sx(pt.tau), sy(pt.rho)))
            prev_rho = pt.rho
        coords.append((sx(tmax), sy(prev_rho)))
        d = " ".join(f"{x:.1f},{y:.1f}" for x, y in coords)
        lines.append(f'<polyline points="{d}" fill="none" '
                     f'stroke="{_SVG_COLORS[k % 6]}" stroke-width="1.5"/>')
        lines.append(f'<text x="{width-margin+4}" y="{margin+14*k}" font-size="11" '
                     f'fill="{_SVG_COLORS[k % 6]}">{rule.value}</text>')
    lines.append("</svg>")
    with open(path, "w") as fh:
        fh.write("\n".join(lines))


def _render_rank_svg(rank_share, n_instances, path, width=640, height=420, margin=50):
    rules = sorted(rank_share, key=lambda r: r.order)
    bar_w = (width - 2 * margin) / len(rules)
    lines = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}">',
             f'<rect width="{width}" height="{height}" fill="white"/>']
    for i, rule in enumerate(rules):
        x0 = margin + i * bar_w
        y = float(height - margin)
        for k in range(len(rules)):
            share = rank_share[rule][k] / n_instances
            h = share * (height - 2 * margin)
            y -= h
            lines.append(f'<rect x="{x0+4:.1f}" y="{y:.1f}" width="{bar_w-8:.1f}" '
                         f'height="{h:.1f}" fill="{_SVG_COLORS[k % 6]}"/>')
        lines.append(f'<text x="{x0 + bar_w/2 - 12:.1f}" y="{height - margin + 16}" '
                     f'font-size="11">{rule.value}</text>')
    lines.append("</svg>")
    with open(path, "w") as fh:
        fh.write("\n".join(lines))
