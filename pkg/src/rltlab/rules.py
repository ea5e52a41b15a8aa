"""Portfolio of spatial branching rules.

Every rule scores variables from the lifted-identity violations at the
node's LP optimum.  "max" takes the largest violation per variable; the
other five are weighted sums differing only in the weights: all-ones,
absolute shadow prices of the constraints containing the monomial, the
relative distance of the LP value to the node bounds, or a static
eigencentrality of the variable in one of the two instance graphs.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from .model import Multiset, Problem, ms_add
from .graphs import build_cmig, build_vig, cmig_variable_nodes, eigencentrality


class RuleId(enum.Enum):
    MAX = "max"
    SUM = "sum"
    DUAL = "dual"
    RANGE = "range"
    EIG_VI = "eig-vi"
    EIG_CMI = "eig-cmi"

    @property
    def order(self) -> int:
        return _RULE_ORDER[self]

    @staticmethod
    def from_name(name: str) -> "RuleId":
        for r in RuleId:
            if r.value == name:
                return r
        raise ValueError(f"unknown rule {name!r}; expected one of "
                         + "|".join(r.value for r in RuleId))


_RULE_ORDER = {r: i for i, r in enumerate(RuleId)}
ALL_RULES = tuple(RuleId)


@dataclass(frozen=True)
class StaticRuleData:
    """Per-instance data shared by every node of a search tree."""

    root_lo: np.ndarray
    root_hi: np.ndarray
    vig_centrality: np.ndarray        # per variable
    cmig_centrality: np.ndarray       # per variable; 0 if never alone in a monomial
    membership: dict[Multiset, tuple[int, ...]]  # multiset -> constraints containing it


def build_static_data(problem: Problem) -> StaticRuleData:
    vig = build_vig(problem)
    cmig = build_cmig(problem)
    vig_c = eigencentrality(vig)
    cmig_scores = eigencentrality(cmig)
    var_nodes = cmig_variable_nodes(problem)
    cmig_c = np.zeros(problem.n)
    for j, node in var_nodes.items():
        cmig_c[j] = cmig_scores[node]
    membership: dict[Multiset, tuple[int, ...]] = {}
    acc: dict[Multiset, list[int]] = {}
    for r, con in enumerate(problem.constraints):
        for s in con.poly.supports():
            acc.setdefault(s, []).append(r)
    membership = {s: tuple(rs) for s, rs in acc.items()}
    lo = np.array([b[0] for b in problem.bounds])
    hi = np.array([b[1] for b in problem.bounds])
    return StaticRuleData(lo, hi, vig_c, cmig_c, membership)


@dataclass(frozen=True)
class NodeContext:
    n: int
    violations: tuple[tuple[int, Multiset, float], ...]
    x: np.ndarray                      # LP values of the original variables
    duals: np.ndarray                  # per original constraint
    box_lo: np.ndarray
    box_hi: np.ndarray
    static: StaticRuleData


def score(rule: RuleId, ctx: NodeContext) -> np.ndarray:
    theta = np.zeros(ctx.n)
    if rule is RuleId.MAX:
        for j, _, v in ctx.violations:
            if v > theta[j]:
                theta[j] = v
        return theta
    if rule is RuleId.SUM:
        for j, _, v in ctx.violations:
            theta[j] += v
        return theta
    if rule is RuleId.DUAL:
        for j, sub, v in ctx.violations:
            full = ms_add(sub, j)
            w = 0.0
            for r in ctx.static.membership.get(full, ()):
                w += abs(ctx.duals[r])
            theta[j] += w * v
        return theta
    if rule is RuleId.RANGE:
        root_range = ctx.static.root_hi - ctx.static.root_lo
        w = np.zeros(ctx.n)
        ok = root_range > 0
        w[ok] = np.minimum(ctx.box_hi - ctx.x, ctx.x - ctx.box_lo)[ok] / root_range[ok]
        np.maximum(w, 0.0, out=w)  # LP round-off can place x just outside the box
        for j, _, v in ctx.violations:
            theta[j] += w[j] * v
        return theta
    weights = ctx.static.vig_centrality if rule is RuleId.EIG_VI else ctx.static.cmig_centrality
    for j, _, v in ctx.violations:
        theta[j] += weights[j] * v
    return theta


def select_variable(theta: np.ndarray, tol: float = 1e-6) -> int | None:
    """Argmax over scores above tol; smallest index wins ties; None when
    every score is at most tol."""
    best = None
    best_v = tol
    for j, v in enumerate(theta):
        if v > best_v:
            best = j
            best_v = v
    return best


def branch_point(ctx: NodeContext, j: int, mu: float = 0.1) -> float:
    """Clamp the LP value away from the node bounds so both children keep
    positive width."""
    lo, hi = ctx.box_lo[j], ctx.box_hi[j]
    width = hi - lo
    if width <= 0:
        raise ValueError(f"cannot branch on fixed variable {j}")
    return float(min(max(ctx.x[j], lo + mu * width), hi - mu * width))
