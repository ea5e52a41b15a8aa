"""Spatial branch-and-bound driver.

Best-bound search over boxes: each node's lower bound comes from the LP
relaxation over its box, upper bounds come from feasibility checks of LP
points and from nodes whose LP optimum satisfies the lifted identities
(there the relaxation is exact and the node is solved).  The trace
records the certified global lower bound over time.

The clock is pluggable: "wall" measures seconds, "nodes" counts processed
nodes as pseudo-time, which makes whole runs bit-reproducible.
"""

from __future__ import annotations

import heapq
import time
from dataclasses import dataclass, field

import numpy as np

from .lp import solve_lp
from .model import Problem, check_feasible
from .rlt import linearize, violation_terms
from .rules import (
    NodeContext,
    RuleId,
    StaticRuleData,
    branch_point,
    build_static_data,
    score,
    select_variable,
)


class ProblemInfeasibleError(ValueError):
    pass


@dataclass(frozen=True)
class SolveLimits:
    time_limit: float = 60.0
    max_nodes: int = 1_000_000
    gap_tol: float = 1e-4


@dataclass(frozen=True)
class SolveTrace:
    rule: RuleId
    lb_init: float
    lb_history: tuple[tuple[float, float], ...]   # (elapsed, global LB)
    lb_fin: float
    ub_fin: float | None
    status: str                                   # "solved" | "time-limit" | "node-limit"
    nodes_processed: int
    wall_time: float
    ub_init: float | None = None
    instance: str = ""
    family: str = ""

    @property
    def root_solved(self) -> bool:
        return self.status == "solved" and self.nodes_processed <= 1


class _Clock:
    def __init__(self, mode: str):
        if mode not in ("wall", "nodes"):
            raise ValueError("clock must be 'wall' or 'nodes'")
        self.mode = mode
        self._t0 = time.perf_counter()
        self.nodes = 0

    def elapsed(self) -> float:
        if self.mode == "nodes":
            return float(self.nodes)
        return time.perf_counter() - self._t0


def _ub_threshold(ub: float, gap_tol: float) -> float:
    if ub == np.inf:
        return np.inf
    return ub - gap_tol * max(abs(ub), 1e-3)


def root_info(problem: Problem):
    """Root relaxation value and LP solution; rule-independent."""
    relax = linearize(problem)
    sol = solve_lp(relax.lp)
    if sol.status == "infeasible":
        raise ProblemInfeasibleError("root relaxation infeasible")
    if sol.status != "optimal":
        raise ProblemInfeasibleError(f"root relaxation {sol.status}")
    return relax.lower_bound(sol), sol


def solve(problem: Problem, rule: RuleId, limits: SolveLimits = SolveLimits(),
          clock: str = "wall", rule_tol: float = 1e-6, feas_tol: float = 1e-6,
          static: StaticRuleData | None = None) -> SolveTrace:
    ck = _Clock(clock)
    if static is None:
        static = build_static_data(problem)
    n = problem.n

    heap: list[tuple[float, int, tuple[tuple[float, float], ...]]] = []
    seq = 0
    heapq.heappush(heap, (-np.inf, seq, problem.bounds))
    seq += 1

    ub = np.inf
    lb = -np.inf
    history: list[tuple[float, float]] = []
    status = "solved"
    lb_init: float | None = None

    def record_lb(value: float):
        nonlocal lb
        if value > lb:
            lb = value
            history.append((ck.elapsed(), lb))

    while heap:
        # the root node is always processed, whatever the limits
        if ck.nodes > 0:
            if ck.nodes >= limits.max_nodes:
                status = "node-limit"
                break
            if ck.elapsed() >= limits.time_limit:
                status = "time-limit"
                break
        bound, _, box = heapq.heappop(heap)
        thresh = _ub_threshold(ub, limits.gap_tol)
        if bound >= thresh:
            # heap is bound-sorted: every open node is within tolerance
            record_lb(min(max(bound, lb), ub))
            heap.clear()
            break

        relax = linearize(problem, box)
        sol = solve_lp(relax.lp)
        ck.nodes += 1
        if sol.status == "infeasible":
            if not heap:
                break
            record_lb(min(heap[0][0], ub) if ub < np.inf else heap[0][0])
            continue
        if sol.status != "optimal":
            raise RuntimeError(f"node LP returned {sol.status}")

        node_lb = max(bound, relax.lower_bound(sol))
        if lb_init is None:
            lb_init = node_lb
            record_lb(node_lb)

        x = relax.x_values(sol)[:n]
        rep = check_feasible(problem, x, tol=feas_tol)
        if rep.feasible:
            ub = min(ub, problem.objective.evaluate(x))

        fathomed = node_lb >= _ub_threshold(ub, limits.gap_tol)
        if not fathomed:
            viols = violation_terms(relax, sol)
            ctx = NodeContext(
                n=n,
                violations=tuple(viols),
                x=x,
                duals=sol.duals[: len(problem.constraints)],
                box_lo=np.array([b[0] for b in box]),
                box_hi=np.array([b[1] for b in box]),
                static=static,
            )
            jstar = select_variable(score(rule, ctx), rule_tol)
            if jstar is None:
                worst = max((v for _, _, v in viols), default=0.0)
                if worst <= rule_tol:
                    # relaxation exact at this point: node solved
                    if rep.feasible:
                        ub = min(ub, problem.objective.evaluate(x))
                    fathomed = True
                else:
                    # rule weights vanished while identities are violated;
                    # fall back to the total violation per variable
                    total = np.zeros(n)
                    for j, _, v in viols:
                        total[j] += v
                    jstar = select_variable(total, rule_tol)
                    if jstar is None:
                        fathomed = True
            if not fathomed and jstar is not None:
                omega = branch_point(ctx, jstar)
                lo_box = list(box)
                hi_box = list(box)
                lo_box[jstar] = (box[jstar][0], omega)
                hi_box[jstar] = (omega, box[jstar][1])
                heapq.heappush(heap, (node_lb, seq, tuple(lo_box)))
                seq += 1
                heapq.heappush(heap, (node_lb, seq, tuple(hi_box)))
                seq += 1

        # certified global LB: best bound among open nodes
        if heap:
            record_lb(min(heap[0][0], ub) if ub < np.inf else heap[0][0])
        elif ub < np.inf:
            record_lb(ub)

        if ub < np.inf and lb >= _ub_threshold(ub, limits.gap_tol):
            heap.clear()
            break

    if lb_init is None:
        # never processed a node (limits hit before the root solve)
        lb_init = -np.inf
        lb = -np.inf
    if not heap and status == "solved" and ub == np.inf:
        raise ProblemInfeasibleError("search proved the problem infeasible")

    lb_fin = lb
    if history and history[-1][1] != lb_fin:
        history.append((ck.elapsed(), lb_fin))
    elif not history:
        history.append((ck.elapsed(), lb_fin))
    return SolveTrace(
        rule=rule,
        lb_init=float(lb_init),
        lb_history=tuple(history),
        lb_fin=float(lb_fin),
        ub_fin=None if ub == np.inf else float(ub),
        status=status,
        nodes_processed=ck.nodes,
        wall_time=ck.elapsed(),
    )
