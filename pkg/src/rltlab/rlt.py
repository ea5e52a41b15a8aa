"""Linear relaxations of polynomial programs via monomial lifting.

Each monomial prod_{j in J} x_j is replaced by a lifted variable indexed
by the multiset J.  Validity over a box is enforced by bound-factor rows:
for every multiset F of cardinality delta (the problem degree), every
product of factors (x_j - lo_j) / (hi_j - x_j) chosen per copy of j in F
is expanded, linearized and added as a ">= 0" row.

The production relaxation is assembled in normalized coordinates
x_j = lo_j + w_j t_j with t in the unit box, which leaves the LP value,
the duals of the constraint rows, and the implied bounds unchanged (the
lifted spaces are related by an invertible triangular map) while keeping
the bound-factor block perfectly conditioned and reusable across nodes.
Lifted values in original coordinates are recovered from the transform.
"""

from __future__ import annotations

from dataclasses import dataclass
from itertools import combinations_with_replacement

import numpy as np

from .model import (
    Multiset,
    Polynomial,
    Problem,
    ms_degree,
    ms_make,
    ms_remove,
    ms_vars,
)
from .lp import LpModel, LpSolution

DEFAULT_COLUMN_CAP = 200_000


class InstanceTooLargeError(ValueError):
    pass


@dataclass(frozen=True)
class RltDictionary:
    """Ordered multiset -> LP column map; the first n columns are the
    singletons {1}, ..., {n}."""

    columns: dict[Multiset, int]
    n: int
    degree: int

    def __len__(self) -> int:
        return len(self.columns)

    def index(self, ms: Multiset) -> int:
        return self.columns[ms]

    def multisets(self) -> list[Multiset]:
        out: list[Multiset] = [()] * len(self.columns)
        for ms, i in self.columns.items():
            out[i] = ms
        return out

    def column_name(self, ms: Multiset) -> str:
        return "X_" + "_".join(f"{j}:{m}" for j, m in ms)


def collect_dictionary(problem: Problem, cap: int = DEFAULT_COLUMN_CAP) -> RltDictionary:
    """Singletons, problem monomial supports, bound-factor expansion
    supports, and the sub-multiset closure needed for violation pairs.

    With bound factors taken over every cardinality-delta multiset, the
    union is all multisets of degree <= delta; the closure is implied.
    """
    n = problem.n
    delta = problem.degree
    size = 1
    for d in range(1, delta + 1):
        size = size * (n + d) // d
    size -= 1  # C(n + delta, delta) - 1 nonconstant multisets
    if size > cap:
        raise InstanceTooLargeError(
            f"dictionary would need {size} columns (cap {cap})"
        )
    columns: dict[Multiset, int] = {}
    for j in range(n):
        columns[ms_make([j])] = j
    for d in range(2, delta + 1):
        for combo in combinations_with_replacement(range(n), d):
            ms = ms_make(combo)
            columns[ms] = len(columns)
    for s in problem.distinct_supports():
        assert s in columns
    return RltDictionary(columns, n, delta)


def _expand(ms: Multiset):
    for j, m in ms:
        for _ in range(m):
            yield j


def _poly_mult(p: dict[Multiset, float], factor: dict[Multiset, float]) -> dict[Multiset, float]:
    out: dict[Multiset, float] = {}
    for ms1, c1 in p.items():
        for ms2, c2 in factor.items():
            key = ms_make(list(_expand(ms1)) + list(_expand(ms2)))
            out[key] = out.get(key, 0.0) + c1 * c2
    return out


def _assignments(mults: list[int]):
    """How many copies of each distinct variable become lower factors."""
    if not mults:
        yield ()
        return
    for head in range(mults[0] + 1):
        for tail in _assignments(mults[1:]):
            yield (head,) + tail


def bound_factor_rows(box: tuple[tuple[float, float], ...], delta: int, n: int,
                      dictionary: RltDictionary) -> list[tuple[dict[int, float], float]]:
    """All linearized bound-factor products of cardinality delta.

    Returns rows as (column -> coefficient, rhs) meaning  sum >= rhs.
    Duplicate rows arising from degenerate boxes are removed by exact
    canonical hashing.
    """
    rows: list[tuple[dict[int, float], float]] = []
    seen: set = set()
    for combo in combinations_with_replacement(range(n), delta):
        ms = ms_make(combo)
        var_list = ms_vars(ms)
        mults = [m for _, m in ms]
        for lows in _assignments(mults):
            poly: dict[Multiset, float] = {(): 1.0}
            for j, mult, k_low in zip(var_list, mults, lows):
                lo, hi = box[j]
                low_factor = {ms_make([j]): 1.0, (): -lo}
                up_factor = {(): hi, ms_make([j]): -1.0}
                for _ in range(k_low):
                    poly = _poly_mult(poly, low_factor)
                for _ in range(mult - k_low):
                    poly = _poly_mult(poly, up_factor)
            const = poly.pop((), 0.0)
            row = {dictionary.index(k): v for k, v in poly.items() if v != 0.0}
            key = (tuple(sorted(row.items())), -const)
            if key in seen:
                continue
            seen.add(key)
            rows.append((row, -const))
    return rows


# cache of the unit-box bound-factor block, keyed by (n, delta)
_unit_block_cache: dict[tuple[int, int], tuple[np.ndarray, np.ndarray]] = {}


def _unit_bound_block(n: int, delta: int, dictionary: RltDictionary) -> tuple[np.ndarray, np.ndarray]:
    key = (n, delta)
    hit = _unit_block_cache.get(key)
    if hit is not None:
        return hit
    rows = bound_factor_rows(tuple((0.0, 1.0) for _ in range(n)), delta, n, dictionary)
    a = np.zeros((len(rows), len(dictionary)))
    b = np.zeros(len(rows))
    for i, (coeffs, rhs) in enumerate(rows):
        for col, v in coeffs.items():
            a[i, col] = v
        b[i] = rhs
    _unit_block_cache[key] = (a, b)
    return a, b


def _substitute(poly: Polynomial, lo: np.ndarray, width: np.ndarray) -> tuple[dict[Multiset, float], float]:
    """Expand poly(lo + width * t) over t-multisets; returns (coeffs, constant)."""
    acc: dict[Multiset, float] = {}
    const = poly.constant
    for term in poly.terms:
        partial: dict[Multiset, float] = {(): term.coefficient}
        for j, m in term.support:
            factor = {(): float(lo[j]), ms_make([j]): float(width[j])}
            for _ in range(m):
                partial = _poly_mult(partial, factor)
        const += partial.pop((), 0.0)
        for ms, c in partial.items():
            acc[ms] = acc.get(ms, 0.0) + c
    return {k: v for k, v in acc.items() if v != 0.0}, const


@dataclass(frozen=True)
class Relaxation:
    dictionary: RltDictionary
    lp: LpModel
    row_origin: tuple[tuple, ...]   # ("original", r) | ("bound-factor",)
    box: tuple[tuple[float, float], ...]
    offset: float                    # added to the LP value to get the bound
    # triangular recovery X = xmat @ T + xconst, stored CSR-style
    _x_indptr: np.ndarray
    _x_indices: np.ndarray
    _x_data: np.ndarray
    _x_const: np.ndarray

    def original_row(self, r: int) -> int:
        return r

    def lower_bound(self, sol: LpSolution) -> float:
        return sol.objective + self.offset

    def x_values(self, sol: LpSolution) -> np.ndarray:
        """Lifted values in original coordinates; entry j < n is x_j."""
        t = sol.primal
        out = self._x_const.copy()
        for i in range(len(out)):
            s, e = self._x_indptr[i], self._x_indptr[i + 1]
            if e > s:
                out[i] += self._x_data[s:e] @ t[self._x_indices[s:e]]
        return out

    def lift(self, point: np.ndarray) -> np.ndarray:
        """Map an original-space point into LP column space (exact lift)."""
        lo = np.array([b[0] for b in self.box])
        hi = np.array([b[1] for b in self.box])
        width = hi - lo
        t = np.where(width > 0, (np.asarray(point, dtype=float) - lo) / np.where(width > 0, width, 1.0), 0.0)
        vals = np.zeros(len(self.dictionary))
        for ms, col in self.dictionary.columns.items():
            prod = 1.0
            for j, m in ms:
                prod *= t[j] ** m
            vals[col] = prod
        return vals


def linearize(problem: Problem, box: tuple[tuple[float, float], ...] | None = None,
              cap: int = DEFAULT_COLUMN_CAP) -> Relaxation:
    """Build the LP relaxation of the problem over the given box."""
    if box is None:
        box = problem.bounds
    dictionary = collect_dictionary(problem, cap=cap)
    n = problem.n
    n_cols = len(dictionary)
    lo = np.array([b[0] for b in box])
    hi = np.array([b[1] for b in box])
    width = hi - lo

    obj_coeffs, obj_const = _substitute(problem.objective, lo, width)
    c = np.zeros(n_cols)
    for ms, v in obj_coeffs.items():
        c[dictionary.index(ms)] = v

    rows: list[np.ndarray] = []
    rels: list[str] = []
    rhs: list[float] = []
    origin: list[tuple] = []
    for r, con in enumerate(problem.constraints):
        coeffs, const = _substitute(con.poly, lo, width)
        vec = np.zeros(n_cols)
        for ms, v in coeffs.items():
            vec[dictionary.index(ms)] = v
        rows.append(vec)
        rels.append(con.relation)
        rhs.append(con.rhs - const)
        origin.append(("original", r))

    a_bound, b_bound = _unit_bound_block(n, problem.degree, dictionary)
    a = np.vstack([np.vstack(rows), a_bound]) if rows else a_bound.copy()
    b = np.concatenate([np.array(rhs), b_bound])
    rels.extend([">="] * len(b_bound))
    origin.extend([("bound-factor",)] * len(b_bound))

    col_lb = np.full(n_cols, -np.inf)
    col_ub = np.full(n_cols, np.inf)
    col_lb[:n] = 0.0
    col_ub[:n] = 1.0

    lp = LpModel(c=c, lb=col_lb, ub=col_ub, a=a, rel=tuple(rels), b=b)

    # triangular recovery of original-space lifted values from T
    indptr = [0]
    indices: list[int] = []
    data: list[float] = []
    xconst = np.zeros(n_cols)
    for ms in dictionary.multisets():
        partial: dict[Multiset, float] = {(): 1.0}
        for j, m in ms:
            factor = {(): float(lo[j]), ms_make([j]): float(width[j])}
            for _ in range(m):
                partial = _poly_mult(partial, factor)
        col = dictionary.index(ms)
        xconst[col] = partial.pop((), 0.0)
        for sub, v in sorted(partial.items()):
            if v != 0.0:
                indices.append(dictionary.index(sub))
                data.append(v)
        indptr.append(len(indices))

    return Relaxation(
        dictionary=dictionary,
        lp=lp,
        row_origin=tuple(origin),
        box=tuple(box),
        offset=obj_const,
        _x_indptr=np.array(indptr, dtype=np.int64),
        _x_indices=np.array(indices, dtype=np.int64),
        _x_data=np.array(data),
        _x_const=xconst,
    )


def violation_terms(relaxation: Relaxation, sol: LpSolution) -> list[tuple[int, Multiset, float]]:
    """Per-pair lifted-identity violations |X[J + j] - x_j * X[J]| in
    original coordinates.

    One entry for every variable j and multiset J such that J + {j} is a
    dictionary column of degree >= 2.
    """
    d = relaxation.dictionary
    xv = relaxation.x_values(sol)
    out: list[tuple[int, Multiset, float]] = []
    for ms, col in d.columns.items():
        if ms_degree(ms) < 2:
            continue
        big = xv[col]
        for j in ms_vars(ms):
            sub = ms_remove(ms, j)
            out.append((j, sub, abs(big - xv[j] * xv[d.index(sub)])))
    return out


def lp_debug_dump(relaxation: Relaxation) -> str:
    """Human-readable LP text: objective, rows, bounds.

    Columns are named X_ followed by underscore-joined index:multiplicity
    pairs of the lifted multiset (singletons are plain x<j>).
    """
    d = relaxation.dictionary
    names = []
    for ms in d.multisets():
        if len(ms) == 1 and ms[0][1] == 1:
            names.append(f"x{ms[0][0]}")
        else:
            names.append(d.column_name(ms))
    lp = relaxation.lp

    def row_text(coeffs):
        parts = []
        for j in np.nonzero(coeffs)[0]:
            c = coeffs[j]
            parts.append(f"{'-' if c < 0 else '+'} {float(abs(c))!r} {names[j]}")
        text = " ".join(parts) if parts else "0"
        return text[2:] if text.startswith("+ ") else text

    lines = [f"min: {row_text(lp.c)}"]
    for i in range(lp.n_rows):
        tag = relaxation.row_origin[i]
        label = f"r{i}_{tag[0].replace('-', '_')}"
        lines.append(f"{label}: {row_text(lp.a[i])} {lp.rel[i]} {float(lp.b[i])!r}")
    for j, name in enumerate(names):
        lo, hi = lp.lb[j], lp.ub[j]
        if np.isfinite(lo) or np.isfinite(hi):
            lines.append(f"bound: {float(lo)!r} <= {name} <= {float(hi)!r}")
        else:
            lines.append(f"free: {name}")
    return "\n".join(lines) + "\n"


def lift_point(dictionary: RltDictionary, point: np.ndarray) -> np.ndarray:
    """Exact monomial lift X[J] = prod x_j in original coordinates."""
    vals = np.zeros(len(dictionary))
    for ms, col in dictionary.columns.items():
        prod = 1.0
        for j, m in ms:
            prod *= point[j] ** m
        vals[col] = prod
    return vals
