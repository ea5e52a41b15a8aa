"""Dense linear-program solver: two-phase revised simplex.

Solves  min c'x  s.t.  A x (>=|=) b,  lb <= x <= ub,  returning primal
values, per-row duals and a status.  The implementation keeps an explicit
basis inverse updated by rank-1 pivots and refactorizes periodically.
Dantzig pricing is used until a degeneracy stall is detected, after which
Bland's rule guarantees termination.

Dual sign convention: the reported dual of a row is the rate of change of
the optimal objective per unit increase of the right-hand side of the
equivalent "<=" form, i.e. the negative of the standard nonnegative
multiplier of a ">=" row of the minimization.  Consumers that only need
magnitudes can take absolute values.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

REFACTOR_EVERY = 100
STALL_LIMIT = 50


class LpError(Exception):
    pass


class IterationLimitError(LpError):
    """Simplex exceeded its iteration budget (distinct from a status)."""


@dataclass
class LpModel:
    c: np.ndarray            # (n,)
    lb: np.ndarray           # (n,) may be -inf
    ub: np.ndarray           # (n,) may be +inf
    a: np.ndarray            # (m, n)
    rel: tuple[str, ...]     # per row: ">=" or "="
    b: np.ndarray            # (m,)

    def __post_init__(self):
        self.c = np.asarray(self.c, dtype=float)
        self.lb = np.asarray(self.lb, dtype=float)
        self.ub = np.asarray(self.ub, dtype=float)
        n = len(self.c)
        m = len(self.rel)
        self.a = np.asarray(self.a, dtype=float).reshape(m, n)
        self.b = np.asarray(self.b, dtype=float)
        if n < 1:
            raise LpError("model needs at least one column")
        if len(self.b) != m:
            raise LpError("row shape mismatch")
        if not (np.all(np.isfinite(self.a)) and np.all(np.isfinite(self.b)) and np.all(np.isfinite(self.c))):
            raise LpError("coefficients must be finite")

    @property
    def n_cols(self) -> int:
        return len(self.c)

    @property
    def n_rows(self) -> int:
        return len(self.rel)


@dataclass(frozen=True)
class LpSolution:
    status: str              # "optimal" | "infeasible" | "unbounded"
    objective: float
    primal: np.ndarray
    duals: np.ndarray        # per original row, sign convention above

    @property
    def optimal(self) -> bool:
        return self.status == "optimal"


Engine = Callable[..., LpSolution]
_default_engine: Engine | None = None


def set_default_engine(fn: Engine | None):
    """Install a replacement LP engine honoring the solve_lp contract."""
    global _default_engine
    _default_engine = fn


class _Simplex:
    """Standard-form working problem: min c'x, Ax = b, x >= 0, b >= 0."""

    def __init__(self, a, b, opt_tol, max_iter, iters=0, refactor_every=REFACTOR_EVERY,
                 bland=False):
        self.a = a
        self.b = b
        self.m = a.shape[0]
        self.opt_tol = opt_tol
        self.max_iter = max_iter
        self.iters = iters
        self.bland = bland
        self.stall = 0
        self.basis = np.empty(0, dtype=int)
        self.binv = np.empty((0, 0))
        self.refactor_every = refactor_every
        self.pivots_since_refactor = 0

    def set_basis(self, basis):
        self.basis = np.asarray(basis, dtype=int).copy()
        self.refactor()

    def refactor(self):
        try:
            self.binv = np.linalg.inv(self.a[:, self.basis])
        except np.linalg.LinAlgError as e:
            raise LpError("numerically singular basis") from e
        self.pivots_since_refactor = 0

    def xb(self):
        return self.binv @ self.b

    def pivot(self, r: int, q: int, d: np.ndarray):
        self.basis[r] = q
        row = self.binv[r, :] / d[r]
        self.binv -= np.outer(d, row)
        self.binv[r, :] = row
        self.pivots_since_refactor += 1

    def run(self, c, allowed) -> str:
        piv_tol = 1e-7
        ray_tol = 1e-9
        while True:
            if self.iters >= self.max_iter:
                raise IterationLimitError(f"simplex exceeded {self.max_iter} iterations")
            self.iters += 1
            if self.pivots_since_refactor >= self.refactor_every:
                self.refactor()
            y = c[self.basis] @ self.binv
            reduced = c - y @ self.a
            reduced[self.basis] = 0.0
            cand = np.where(allowed & (reduced < -self.opt_tol))[0]
            if cand.size == 0:
                return "optimal"
            if not self.bland:
                cand = cand[np.argsort(reduced[cand], kind="stable")]
            # take the first improving column with a numerically safe pivot;
            # columns blocked only by noise-level pivots are skipped
            pivoted = False
            saw_ray = False
            xb = self.xb()
            for q in cand[:32]:
                q = int(q)
                d = self.binv @ self.a[:, q]
                pos = d > piv_tol
                if not np.any(pos):
                    if np.all(d <= ray_tol):
                        if self.pivots_since_refactor > 0:
                            self.refactor()
                            d = self.binv @ self.a[:, q]
                        if np.all(d <= ray_tol):
                            saw_ray = True
                    continue
                ratios = np.full(self.m, np.inf)
                ratios[pos] = np.maximum(xb[pos], 0.0) / d[pos]
                rmin = ratios.min()
                ties = np.where(ratios <= rmin + 1e-9 * (1.0 + rmin))[0]
                if self.bland:
                    r = int(ties[np.argmin(self.basis[ties])])
                else:
                    # stability: among near-tied ratios take the largest pivot
                    r = int(ties[np.argmax(d[ties])])
                if rmin <= 1e-10:
                    self.stall += 1
                    if self.stall >= STALL_LIMIT:
                        self.bland = True
                else:
                    self.stall = 0
                self.pivot(r, q, d)
                if abs(d[r]) < 1e-5:
                    self.refactor()
                pivoted = True
                break
            if not pivoted:
                if saw_ray:
                    return "unbounded"
                return "optimal"


def _prepare(model: LpModel):
    """Reduce to equality standard form with nonnegative variables.

    Finite lower bounds are shifted out, upper bounds become extra "<="
    rows, free columns are split.  Returns the row system plus the
    metadata needed to map a standard-form solution back.
    """
    n = model.n_cols
    cols: list[tuple] = []
    sf_cols: list[np.ndarray] = []
    sf_costs: list[float] = []
    upper_rows: list[tuple[int, float]] = []
    for j in range(n):
        lo, hi = model.lb[j], model.ub[j]
        aj = model.a[:, j]
        cj = model.c[j]
        if np.isfinite(lo):
            cols.append(("shift", len(sf_cols), lo))
            sf_cols.append(aj.copy())
            sf_costs.append(cj)
            if np.isfinite(hi):
                upper_rows.append((len(sf_cols) - 1, hi - lo))
        elif np.isfinite(hi):
            cols.append(("neg", len(sf_cols), hi))
            sf_cols.append(-aj)
            sf_costs.append(-cj)
        else:
            cols.append(("split", len(sf_cols), len(sf_cols) + 1))
            sf_cols.append(aj.copy())
            sf_costs.append(cj)
            sf_cols.append(-aj)
            sf_costs.append(-cj)

    m0 = model.n_rows
    nsf = len(sf_cols)
    m = m0 + len(upper_rows)
    a = np.zeros((m, nsf))
    a[:m0, :] = np.column_stack(sf_cols)
    b = np.zeros(m)
    b[:m0] = model.b.copy()
    for j in range(n):
        kind = cols[j]
        if kind[0] in ("shift", "neg"):
            b[:m0] -= model.a[:, j] * kind[2]
    rel = list(model.rel)
    for k, (sf_j, rng) in enumerate(upper_rows):
        a[m0 + k, sf_j] = 1.0
        b[m0 + k] = rng
        rel.append("<=")

    slack_of_row = np.full(m, -1, dtype=int)
    extra: list[np.ndarray] = []
    for i, r in enumerate(rel):
        if r in (">=", "<="):
            col = np.zeros(m)
            col[i] = -1.0 if r == ">=" else 1.0
            # a slack can seed the start basis; so can a surplus on a
            # zero-rhs row (basic at level 0)
            if r == "<=" or b[i] == 0.0:
                slack_of_row[i] = nsf + len(extra)
            extra.append(col)
    if extra:
        a = np.hstack([a, np.column_stack(extra)])
    costs = np.concatenate([np.array(sf_costs), np.zeros(len(extra))])

    flip = b < 0
    a[flip, :] *= -1.0
    b[flip] *= -1.0
    slack_of_row[flip] = -1

    return a, b, costs, cols, flip, m0, slack_of_row


def _row_scaled(model: LpModel) -> tuple[LpModel, np.ndarray]:
    """Equilibrate rows to unit max magnitude; duals divide by the scale."""
    if model.n_rows == 0:
        return model, np.ones(0)
    mx = np.max(np.abs(model.a), axis=1)
    mx = np.maximum(mx, np.abs(model.b))
    scale = np.where(mx > 0, mx, 1.0)
    scaled = LpModel(
        c=model.c,
        lb=model.lb,
        ub=model.ub,
        a=model.a / scale[:, None],
        rel=model.rel,
        b=model.b / scale,
    )
    return scaled, scale


def _simplex_solve(model: LpModel, feas_tol: float = 1e-7, opt_tol: float = 1e-9,
                   max_iter: int = 50_000, paranoid: bool = False) -> LpSolution:
    n = model.n_cols
    refactor_every = 1 if paranoid else REFACTOR_EVERY
    model, row_scale = _row_scaled(model)

    a, b, costs, cols, flip, m0, slack_of_row = _prepare(model)
    m, n_all = a.shape

    if m == 0:
        fallback = np.where(np.isfinite(model.lb), model.lb,
                            np.where(np.isfinite(model.ub), model.ub, 0.0))
        x = np.where(model.c > 0, model.lb,
                     np.where(model.c < 0, model.ub, fallback))
        if not np.all(np.isfinite(x)):
            return LpSolution("unbounded", -np.inf, np.zeros(n), np.zeros(0))
        return LpSolution("optimal", float(model.c @ x), x, np.zeros(0))

    # phase 1
    art_rows = [i for i in range(m) if slack_of_row[i] < 0]
    art_first = n_all
    if art_rows:
        art_block = np.zeros((m, len(art_rows)))
        for k, i in enumerate(art_rows):
            art_block[i, k] = 1.0
        a = np.hstack([a, art_block])
    sx = _Simplex(a, b, opt_tol, max_iter, refactor_every=refactor_every, bland=paranoid)
    basis = np.empty(m, dtype=int)
    for i in range(m):
        basis[i] = slack_of_row[i]
    for k, i in enumerate(art_rows):
        basis[i] = art_first + k
    sx.set_basis(basis)

    keep_rows = np.ones(m, dtype=bool)
    if art_rows:
        c1 = np.zeros(a.shape[1])
        c1[art_first:] = 1.0
        status = sx.run(c1, np.ones(a.shape[1], dtype=bool))
        if status != "optimal":
            raise LpError("phase-1 anomaly")
        if float(c1[sx.basis] @ sx.xb()) > feas_tol * (1.0 + float(np.abs(b).max())):
            return LpSolution("infeasible", np.inf, np.zeros(n), np.zeros(m0))
        basic_set = set(int(v) for v in sx.basis)
        sx.refactor()
        for i in range(m):
            if sx.basis[i] >= art_first:
                row = sx.binv[i, :] @ a[:, :art_first]
                row[[q for q in basic_set if q < art_first]] = 0.0
                q = int(np.argmax(np.abs(row)))
                if abs(row[q]) > 1e-6:
                    d = sx.binv @ a[:, q]
                    basic_set.discard(int(sx.basis[i]))
                    basic_set.add(q)
                    sx.pivot(i, q, d)
                    sx.refactor()
                else:
                    keep_rows[i] = False
        a = a[:, :art_first]
        if not np.all(keep_rows):
            rows = np.where(keep_rows)[0]
            a = a[rows, :]
            b = b[rows]
            basis = sx.basis[rows]
            sx = _Simplex(a, b, opt_tol, max_iter, iters=sx.iters,
                          refactor_every=refactor_every, bland=paranoid)
            sx.set_basis(basis)
            m = a.shape[0]
        else:
            sx.a = a
            sx.refactor()

    # phase 2
    status = sx.run(costs, np.ones(a.shape[1], dtype=bool))
    if status == "unbounded":
        return LpSolution("unbounded", -np.inf, np.zeros(n), np.zeros(m0))

    sx.refactor()
    xb = sx.xb()
    xb[np.abs(xb) < 1e-12] = 0.0
    x_sf = np.zeros(a.shape[1])
    x_sf[sx.basis] = xb
    y = costs[sx.basis] @ sx.binv

    x = np.zeros(n)
    for j in range(n):
        kind = cols[j]
        if kind[0] == "shift":
            x[j] = kind[2] + x_sf[kind[1]]
        elif kind[0] == "neg":
            x[j] = kind[2] - x_sf[kind[1]]
        else:
            x[j] = x_sf[kind[1]] - x_sf[kind[2]]
    obj = float(model.c @ x)

    duals = np.zeros(m0)
    kept = np.where(keep_rows)[0]
    for pos, i_orig in enumerate(kept):
        if i_orig < m0:
            d = float(y[pos])
            if flip[i_orig]:
                d = -d
            duals[i_orig] = -d / row_scale[i_orig]
    duals[np.abs(duals) < 1e-12] = 0.0
    return LpSolution("optimal", obj, x, duals)


def solve_lp(model: LpModel, feas_tol: float = 1e-7, opt_tol: float = 1e-9,
             max_iter: int = 50_000) -> LpSolution:
    """Solve the LP; deterministic for identical input.

    On a numerical failure of the fast path the solve is repeated with
    Bland's rule and per-pivot refactorization, which is slow but safe.
    """
    if _default_engine is not None:
        return _default_engine(model, feas_tol=feas_tol, opt_tol=opt_tol, max_iter=max_iter)
    try:
        return _simplex_solve(model, feas_tol, opt_tol, max_iter)
    except IterationLimitError:
        raise
    except LpError:
        return _simplex_solve(model, feas_tol, opt_tol, max_iter, paranoid=True)
