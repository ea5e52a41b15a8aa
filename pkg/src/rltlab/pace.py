"""Pace KPIs, normalization, ranks and performance profiles.

The lower-bound pace of a run is wall time divided by the lower-bound
improvement plus a small epsilon: the time needed to improve the bound
by one unit, so smaller is better.  The gap-based variant divides by the
magnitude of the optimality-gap change instead and needs an initial upper
bound.  Normalization maps each instance's rule paces to (0, 1] by
dividing the instance-best (smallest) pace by each rule's pace.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .engine import SolveTrace
from .rules import RuleId

EPSILON = 0.001


def lb_pace(trace: SolveTrace, epsilon: float = EPSILON) -> float:
    improvement = trace.lb_fin - trace.lb_init
    if improvement < -1e-9:
        raise ValueError("lower bound decreased; corrupt trace")
    return trace.wall_time / (max(improvement, 0.0) + epsilon)


def og_gap(ub: float, lb: float, epsilon: float = EPSILON) -> float:
    return (ub - lb) / (ub + epsilon)


def og_pace(trace: SolveTrace, epsilon: float = EPSILON) -> float | None:
    """Time per unit of optimality-gap improvement; None without an
    initial upper bound."""
    if trace.ub_init is None:
        return None
    og_init = og_gap(trace.ub_init, trace.lb_init, epsilon)
    ub_fin = trace.ub_fin if trace.ub_fin is not None else trace.ub_init
    og_fin = og_gap(ub_fin, trace.lb_fin, epsilon)
    return trace.wall_time / (abs(og_init - og_fin) + epsilon)


def normalize(paces: dict[RuleId, float]) -> dict[RuleId, float]:
    if not paces:
        raise ValueError("empty pace map")
    for r, p in paces.items():
        if p <= 0:
            raise ValueError(f"pace of {r.value} must be positive")
    best = min(paces.values())
    return {r: best / p for r, p in paces.items()}


def ranks(paces: dict[RuleId, float]) -> dict[RuleId, int]:
    """1 = best (smallest pace); ties broken by rule order."""
    order = sorted(paces, key=lambda r: (paces[r], r.order))
    return {r: i + 1 for i, r in enumerate(order)}


def geo_mean(values) -> float:
    vals = list(values)
    if not vals:
        raise ValueError("geometric mean of nothing")
    if any(v <= 0 for v in vals):
        raise ValueError("geometric mean needs positive values")
    return math.exp(sum(math.log(v) for v in vals) / len(vals))


@dataclass(frozen=True)
class ProfilePoint:
    rule: RuleId
    tau: float
    rho: float


def performance_profile(records: dict[str, dict[RuleId, float]]) -> list[ProfilePoint]:
    """Step curves rho_r(tau) = share of instances whose pace ratio to the
    instance-best is at most tau, emitted at every breakpoint."""
    if not records:
        return []
    rules = None
    ratios: dict[RuleId, list[float]] = {}
    for inst, paces in sorted(records.items()):
        if rules is None:
            rules = sorted(paces, key=lambda r: r.order)
        if sorted(paces, key=lambda r: r.order) != rules:
            raise ValueError(f"instance {inst} missing rule paces")
        best = min(paces.values())
        for r, p in paces.items():
            ratios.setdefault(r, []).append(p / best if best > 0 else 1.0)
    n_inst = len(records)
    taus = sorted({x for rs in ratios.values() for x in rs})
    points: list[ProfilePoint] = []
    for r in rules:
        rs = sorted(ratios[r])
        for tau in taus:
            covered = sum(1 for x in rs if x <= tau)
            points.append(ProfilePoint(r, tau, covered / n_inst))
    return points
