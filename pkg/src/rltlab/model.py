"""Boxed polynomial optimization problems.

A problem minimizes a polynomial objective over a box, subject to
polynomial ">=" and "=" constraints.  Monomials are identified by a
canonical multiset of variable indices: a sorted tuple of
(index, multiplicity) pairs.  The empty multiset is never stored; constant
parts live in ``Polynomial.constant`` / the constraint right-hand side.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field, replace
from itertools import combinations_with_replacement
from typing import Iterable, Sequence

import numpy as np

# Canonical monomial key: ((var_index, multiplicity), ...) with strictly
# increasing indices and multiplicities >= 1.
Multiset = tuple[tuple[int, int], ...]


def ms_make(indices: Iterable[int]) -> Multiset:
    """Build a canonical multiset from an iterable of variable indices."""
    counts: dict[int, int] = {}
    for j in indices:
        counts[j] = counts.get(j, 0) + 1
    return tuple(sorted(counts.items()))


def ms_degree(ms: Multiset) -> int:
    return sum(m for _, m in ms)


def ms_vars(ms: Multiset) -> tuple[int, ...]:
    return tuple(j for j, _ in ms)


def ms_expand(ms: Multiset) -> tuple[int, ...]:
    """Indices with multiplicity, e.g. {1:2, 3:1} -> (1, 1, 3)."""
    out: list[int] = []
    for j, m in ms:
        out.extend([j] * m)
    return tuple(out)


def ms_add(ms: Multiset, j: int) -> Multiset:
    counts = dict(ms)
    counts[j] = counts.get(j, 0) + 1
    return tuple(sorted(counts.items()))


def ms_remove(ms: Multiset, j: int) -> Multiset:
    """Remove one copy of j; j must be present."""
    counts = dict(ms)
    if counts.get(j, 0) < 1:
        raise KeyError(f"variable {j} not in multiset {ms}")
    counts[j] -= 1
    if counts[j] == 0:
        del counts[j]
    return tuple(sorted(counts.items()))


@dataclass(frozen=True)
class Monomial:
    coefficient: float
    support: Multiset

    def degree(self) -> int:
        return ms_degree(self.support)


@dataclass(frozen=True)
class Polynomial:
    """Sum of monomials plus a constant; supports are unique and sorted."""

    terms: tuple[Monomial, ...]
    constant: float = 0.0

    @staticmethod
    def from_dict(d: dict[Multiset, float], constant: float = 0.0) -> "Polynomial":
        terms = tuple(
            Monomial(c, s) for s, c in sorted(d.items()) if c != 0.0
        )
        return Polynomial(terms, constant)

    def as_dict(self) -> dict[Multiset, float]:
        return {t.support: t.coefficient for t in self.terms}

    def degree(self) -> int:
        return max((t.degree() for t in self.terms), default=0)

    def supports(self) -> tuple[Multiset, ...]:
        return tuple(t.support for t in self.terms)

    def evaluate(self, point: Sequence[float]) -> float:
        total = self.constant
        for t in self.terms:
            prod = t.coefficient
            for j, m in t.support:
                prod *= point[j] ** m
            total += prod
        return total


@dataclass(frozen=True)
class Constraint:
    name: str
    poly: Polynomial
    relation: str  # ">=" or "="
    rhs: float


@dataclass(frozen=True)
class Problem:
    n: int
    bounds: tuple[tuple[float, float], ...]
    objective: Polynomial
    constraints: tuple[Constraint, ...]
    var_names: tuple[str, ...]
    family: str = ""

    def __post_init__(self):
        if len(self.bounds) != self.n or len(self.var_names) != self.n:
            raise ValueError("bounds/names length mismatch")
        for name, (lo, hi) in zip(self.var_names, self.bounds):
            if not (0.0 <= lo <= hi < math.inf):
                raise ValueError(f"invalid bounds [{lo}, {hi}] for {name}")
        if not self.constraints:
            raise ValueError("problem must have at least one constraint")

    @property
    def degree(self) -> int:
        polys = [self.objective] + [c.poly for c in self.constraints]
        return max(p.degree() for p in polys)

    def all_polys(self) -> tuple[Polynomial, ...]:
        """Objective first, then constraint bodies."""
        return (self.objective,) + tuple(c.poly for c in self.constraints)

    def distinct_supports(self) -> tuple[Multiset, ...]:
        seen: dict[Multiset, None] = {}
        for p in self.all_polys():
            for s in p.supports():
                seen.setdefault(s, None)
        return tuple(sorted(seen))

    def with_family(self, family: str) -> "Problem":
        return replace(self, family=family)


@dataclass(frozen=True)
class FeasibilityReport:
    feasible: bool
    max_violation: float
    violated: tuple[str, ...]


def check_feasible(problem: Problem, point: Sequence[float], tol: float = 1e-6) -> FeasibilityReport:
    """Check box membership and constraint satisfaction within tol."""
    if tol <= 0:
        raise ValueError("tol must be positive")
    if len(point) != problem.n:
        raise ValueError("point length mismatch")
    worst = 0.0
    bad: list[str] = []
    for j, (lo, hi) in enumerate(problem.bounds):
        v = max(lo - point[j], point[j] - hi, 0.0)
        if v > tol:
            bad.append(f"box:{problem.var_names[j]}")
        worst = max(worst, v)
    for c in problem.constraints:
        val = c.poly.evaluate(point)
        v = abs(val - c.rhs) if c.relation == "=" else max(c.rhs - val, 0.0)
        if v > tol:
            bad.append(c.name)
        worst = max(worst, v)
    return FeasibilityReport(not bad, worst, tuple(bad))


# ---------------------------------------------------------------------------
# Instance file format
# ---------------------------------------------------------------------------
#
#   # comment to end of line
#   var x1 in [0, 1]
#   min: 2 x1^2 x2 - 0.5 x1*x2 + 3
#   st c1: x1 + x2 >= 0.5
#   st c2: x1 - x2 = 0
#
# Statements are separated by newlines or semicolons.  "max:" objectives and
# "<=" constraints are normalized by negation at parse time.


class ParseError(ValueError):
    def __init__(self, message: str, line: int, col: int):
        super().__init__(f"line {line}, col {col}: {message}")
        self.line = line
        self.col = col


_TOKEN_RE = re.compile(
    r"""
    (?P<num>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)
  | (?P<name>[A-Za-z_][A-Za-z0-9_]*)
  | (?P<op>>=|<=|=|\^|\*|\+|-|:|\[|\]|,)
  | (?P<ws>\s+)
  | (?P<bad>.)
    """,
    re.VERBOSE,
)


def _tokenize(stmt: str, line: int, col0: int) -> list[tuple[str, str, int]]:
    toks = []
    for m in _TOKEN_RE.finditer(stmt):
        kind = m.lastgroup
        if kind == "ws":
            continue
        if kind == "bad":
            raise ParseError(f"unexpected character {m.group()!r}", line, col0 + m.start() + 1)
        toks.append((kind, m.group(), col0 + m.start() + 1))
    return toks


class _Parser:
    """Recursive-descent parser over one statement's token list."""

    def __init__(self, toks, line):
        self.toks = toks
        self.line = line
        self.i = 0

    def peek(self):
        return self.toks[self.i] if self.i < len(self.toks) else None

    def next(self):
        t = self.peek()
        if t is None:
            raise ParseError("unexpected end of statement", self.line, self._end_col())
        self.i += 1
        return t

    def _end_col(self):
        return self.toks[-1][2] + len(self.toks[-1][1]) if self.toks else 1

    def expect(self, text):
        t = self.next()
        if t[1] != text:
            raise ParseError(f"expected {text!r}, found {t[1]!r}", self.line, t[2])
        return t

    def real(self) -> float:
        sign = 1.0
        t = self.peek()
        if t is not None and t[1] in "+-":
            self.next()
            sign = -1.0 if t[1] == "-" else 1.0
        t = self.next()
        if t[0] != "num":
            raise ParseError(f"expected number, found {t[1]!r}", self.line, t[2])
        return sign * float(t[1])

    def name(self) -> str:
        t = self.next()
        if t[0] != "name":
            raise ParseError(f"expected identifier, found {t[1]!r}", self.line, t[2])
        return t[1]

    def polyexpr(self, var_ids: dict[str, int]) -> tuple[dict[Multiset, float], float]:
        """Signed sum of terms -> (support -> coefficient, constant)."""
        coeffs: dict[Multiset, float] = {}
        constant = 0.0
        first = True
        while True:
            t = self.peek()
            if t is None:
                if first:
                    raise ParseError("empty expression", self.line, self._end_col())
                break
            sign = 1.0
            if t[1] in "+-":
                self.next()
                sign = -1.0 if t[1] == "-" else 1.0
            elif not first:
                raise ParseError(f"expected '+' or '-', found {t[1]!r}", self.line, t[2])
            coef, support = self._term(var_ids)
            if support:
                key = ms_make(support)
                coeffs[key] = coeffs.get(key, 0.0) + sign * coef
            else:
                constant += sign * coef
            first = False
        return {k: v for k, v in coeffs.items() if v != 0.0}, constant

    def _term(self, var_ids: dict[str, int]) -> tuple[float, list[int]]:
        coef = 1.0
        support: list[int] = []
        t = self.peek()
        if t is None:
            raise ParseError("empty term", self.line, self._end_col())
        if t[0] == "num":
            self.next()
            coef = float(t[1])
        else:
            self._power(var_ids, support)
        while True:
            t = self.peek()
            if t is not None and t[1] == "*":
                self.next()
                t = self.peek()
                if t is None:
                    raise ParseError("dangling '*'", self.line, self._end_col())
            if t is None or t[0] != "name":
                break
            self._power(var_ids, support)
        return coef, support

    def _power(self, var_ids: dict[str, int], support: list[int]):
        t = self.next()
        if t[0] != "name":
            raise ParseError(f"expected variable, found {t[1]!r}", self.line, t[2])
        if t[1] not in var_ids:
            raise ParseError(f"variable {t[1]!r} used without declaration", self.line, t[2])
        exp = 1
        nxt = self.peek()
        if nxt is not None and nxt[1] == "^":
            self.next()
            et = self.next()
            if et[0] != "num" or "." in et[1] or "e" in et[1].lower():
                raise ParseError("exponent must be a positive integer", self.line, et[2])
            exp = int(et[1])
            if exp < 1:
                raise ParseError("exponent must be >= 1", self.line, et[2])
        support.extend([var_ids[t[1]]] * exp)

    def done(self):
        t = self.peek()
        if t is not None:
            raise ParseError(f"trailing input {t[1]!r}", self.line, t[2])


def parse_problem(text: str, family: str = "") -> Problem:
    """Parse the line-oriented instance format into a Problem."""
    var_names: list[str] = []
    var_ids: dict[str, int] = {}
    bounds: list[tuple[float, float]] = []
    objective: tuple[dict[Multiset, float], float] | None = None
    obj_sign = 1.0
    constraints: list[Constraint] = []
    seen_cnames: set[str] = set()

    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0]
        col0 = 0
        for stmt in line.split(";"):
            if not stmt.strip():
                col0 += len(stmt) + 1
                continue
            toks = _tokenize(stmt, lineno, col0)
            p = _Parser(toks, lineno)
            head = p.name()
            if head == "var":
                vname = p.name()
                if vname in var_ids:
                    raise ParseError(f"variable {vname!r} redeclared", lineno, toks[1][2])
                p.expect("in")
                p.expect("[")
                lo = p.real()
                p.expect(",")
                hi = p.real()
                p.expect("]")
                p.done()
                if lo < 0:
                    raise ParseError(f"lower bound of {vname!r} must be >= 0", lineno, toks[0][2])
                if lo > hi:
                    raise ParseError(f"bounds of {vname!r} out of order", lineno, toks[0][2])
                var_ids[vname] = len(var_names)
                var_names.append(vname)
                bounds.append((lo, hi))
            elif head in ("min", "max"):
                if objective is not None:
                    raise ParseError("duplicate objective", lineno, toks[0][2])
                p.expect(":")
                objective = p.polyexpr(var_ids)
                p.done()
                obj_sign = -1.0 if head == "max" else 1.0
            elif head == "st":
                cname = p.name()
                if cname in seen_cnames:
                    raise ParseError(f"constraint {cname!r} redeclared", lineno, toks[1][2])
                seen_cnames.add(cname)
                p.expect(":")
                # split at the relation token
                rel_i = None
                for k in range(p.i, len(toks)):
                    if toks[k][1] in (">=", "<=", "="):
                        rel_i = k
                        break
                if rel_i is None:
                    raise ParseError("constraint missing relation", lineno, toks[-1][2])
                lhs_parser = _Parser(toks[p.i:rel_i], lineno)
                coeffs, const = lhs_parser.polyexpr(var_ids)
                lhs_parser.done()
                rel = toks[rel_i][1]
                rhs_parser = _Parser(toks[rel_i + 1:], lineno)
                rhs = rhs_parser.real()
                rhs_parser.done()
                rhs -= const  # constants move to the right-hand side
                if rel == "<=":
                    coeffs = {k: -v for k, v in coeffs.items()}
                    rhs = -rhs
                    rel = ">="
                constraints.append(
                    Constraint(cname, Polynomial.from_dict(coeffs), rel, rhs)
                )
            else:
                raise ParseError(f"unknown statement {head!r}", lineno, toks[0][2])
            col0 += len(stmt) + 1

    if objective is None:
        raise ParseError("missing objective", 1, 1)
    obj_coeffs, obj_const = objective
    if obj_sign < 0:
        obj_coeffs = {k: -v for k, v in obj_coeffs.items()}
        obj_const = -obj_const
    return Problem(
        n=len(var_names),
        bounds=tuple(bounds),
        objective=Polynomial.from_dict(obj_coeffs, obj_const),
        constraints=tuple(constraints),
        var_names=tuple(var_names),
        family=family,
    )


def _fmt(x: float) -> str:
    return repr(float(x))


def _render_poly(poly: Polynomial, var_names: Sequence[str]) -> str:
    parts: list[str] = []
    for t in poly.terms:
        factors = " ".join(
            f"{var_names[j]}^{m}" if m > 1 else var_names[j] for j, m in t.support
        )
        c = t.coefficient
        sign = "-" if c < 0 else "+"
        mag = abs(c)
        body = factors if mag == 1.0 else f"{_fmt(mag)} {factors}"
        parts.append(f"{sign} {body}")
    if poly.constant != 0.0 or not parts:
        sign = "-" if poly.constant < 0 else "+"
        parts.append(f"{sign} {_fmt(abs(poly.constant))}")
    text = " ".join(parts)
    return text[2:] if text.startswith("+ ") else "-" + text[2:]


def render_problem(problem: Problem) -> str:
    """Canonical text form; parse(render(p)) reproduces p exactly."""
    lines = []
    for name, (lo, hi) in zip(problem.var_names, problem.bounds):
        lines.append(f"var {name} in [{_fmt(lo)}, {_fmt(hi)}]")
    lines.append(f"min: {_render_poly(problem.objective, problem.var_names)}")
    for c in problem.constraints:
        lines.append(
            f"st {c.name}: {_render_poly(c.poly, problem.var_names)} {c.relation} {_fmt(c.rhs)}"
        )
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# Random generation
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class GenSpec:
    n: int
    degree: int
    density: float
    n_constraints: int
    eq_fraction: float = 0.0
    seed: int = 0
    family: str = ""


def all_supports(n: int, degree: int) -> list[Multiset]:
    """All nonconstant monomial multisets of degree <= degree, sorted."""
    out: list[Multiset] = []
    for d in range(1, degree + 1):
        for combo in combinations_with_replacement(range(n), d):
            out.append(ms_make(combo))
    out.sort()
    return out


def _round_half_up(x: float) -> int:
    return int(math.floor(x + 0.5))


def generate_random_with_anchor(spec: GenSpec) -> tuple[Problem, np.ndarray]:
    """Generate a feasible random problem plus the interior anchor point.

    Every polynomial draws round(density * M) supports uniformly without
    replacement from the M nonconstant monomials of degree <= spec.degree,
    with coefficients uniform on [-1, 1] minus zero.  Right-hand sides are
    anchored at a uniform interior point so the instance is feasible by
    construction.
    """
    if spec.n < 1 or spec.degree < 2 or spec.n_constraints < 1:
        raise ValueError("need n >= 1, degree >= 2, constraints >= 1")
    if not (0.0 < spec.density <= 1.0):
        raise ValueError("density must be in (0, 1]")
    supports = all_supports(spec.n, spec.degree)
    m_total = len(supports)
    k = _round_half_up(spec.density * m_total)
    if k == 0:
        raise ValueError("density too small: no monomials would be drawn")

    rng = np.random.default_rng(spec.seed)
    bounds = tuple((0.0, 1.0) for _ in range(spec.n))

    def draw_poly() -> Polynomial:
        idx = rng.choice(m_total, size=k, replace=False)
        coeffs: dict[Multiset, float] = {}
        for i in sorted(int(v) for v in idx):
            c = 0.0
            while c == 0.0:
                c = float(rng.uniform(-1.0, 1.0))
            coeffs[supports[i]] = c
        return Polynomial.from_dict(coeffs)

    objective = draw_poly()
    bodies = [draw_poly() for _ in range(spec.n_constraints)]
    anchor = rng.uniform(0.0, 1.0, size=spec.n)

    n_eq = _round_half_up(spec.eq_fraction * spec.n_constraints)
    constraints = []
    for r, body in enumerate(bodies):
        val = float(body.evaluate(anchor))
        if r < spec.n_constraints - n_eq:
            slack = float(rng.uniform(0.0, 1.0))
            constraints.append(Constraint(f"c{r + 1}", body, ">=", val - slack))
        else:
            constraints.append(Constraint(f"c{r + 1}", body, "=", val))

    problem = Problem(
        n=spec.n,
        bounds=bounds,
        objective=objective,
        constraints=tuple(constraints),
        var_names=tuple(f"x{j + 1}" for j in range(spec.n)),
        family=spec.family,
    )
    return problem, anchor


def generate_random(spec: GenSpec) -> Problem:
    return generate_random_with_anchor(spec)[0]
