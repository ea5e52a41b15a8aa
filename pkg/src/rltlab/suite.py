"""Benchmark suites.

`regimes_suite` builds three instance families engineered so that a
different branching rule dominates each family.  Common scaffolding:

* "core" variables carry a concave objective part held away from the box
  corners by a budget row, so the relaxation optimum is interior and the
  productive lifted identities are genuinely violated;
* "decoy" variables have a wide box and a capped lifted square
  (eps-pushed objective term plus a row  d^2 <= B  with B below the
  envelope), which guarantees a large identity violation at every LP
  vertex while branching them barely moves the bound.

The families differ in which scoring signal sees through the decoys:

* centrality: decoys never appear alone in a monomial, so the
  monomial-graph weight is exactly zero for them while every other rule
  chases their violations.
* shadowprice: the productive products sit in binding constraints with
  sizable duals; the decoy squares sit in rows with eps-scale duals, so
  only the shadow-price weights keep focusing on the cores.
* ranges: one wide seductive variable keeps the largest violation for a
  few successive branchings; the node-range weight abandons it first.

`random_suite` wraps the plain random generator.
"""

from __future__ import annotations

import numpy as np

from .model import Constraint, GenSpec, Multiset, Polynomial, Problem, generate_random, ms_make

REGIME_FAMILIES = ("centrality", "shadowprice", "ranges")


def _poly(coeffs: dict[Multiset, float], constant: float = 0.0) -> Polynomial:
    return Polynomial.from_dict(coeffs, constant)


def _jitter(rng: np.random.Generator, base: float, rel: float = 0.2) -> float:
    return float(base * rng.uniform(1.0 - rel, 1.0 + rel))


def _decoy_rows(rng: np.random.Generator, decoys, hi: float, share: float) -> list[Constraint]:
    """Capped lifted squares: -d^2 >= -B with B under the envelope peak."""
    rows = []
    for k, d in enumerate(decoys):
        cap = _jitter(rng, share * hi * hi, 0.1)
        rows.append(Constraint(f"w{k+1}", _poly({ms_make([d, d]): -1.0}), ">=", -cap))
    return rows


# per-family decoy geometry: (box upper bound, cap share of the envelope peak)
KNOBS = {
    "centrality": (8.0, 0.65),
    "shadowprice": (8.0, 0.5),
    "ranges": (16.0, 0.5),
}


def _centrality_instance(rng: np.random.Generator) -> Problem:
    """Decoys have no singleton monomial anywhere: the monomial-graph rule
    branches cores only, every other rule chases the wide decoy columns."""
    n_core, n_decoy = 4, 3
    n = n_core + n_decoy
    core = range(n_core)
    decoys = range(n_core, n)
    hi_d, share = KNOBS["centrality"]
    bounds = [(0.0, 1.0)] * n_core + [(0.0, hi_d)] * n_decoy
    names = tuple([f"c{j+1}" for j in core] + [f"d{k+1}" for k in range(n_decoy)])
    eps = 0.001

    obj: dict[Multiset, float] = {}
    for i in core:
        for j in core:
            if i < j:
                obj[ms_make([i, j])] = -_jitter(rng, 1.0)
        obj[ms_make([i, i])] = -_jitter(rng, 0.5)
        obj[ms_make([i])] = _jitter(rng, 0.3)  # singleton node next to the hub
    for k, d in enumerate(decoys):
        obj[ms_make([d, d])] = -eps
        obj[ms_make([d, core[k % n_core]])] = -eps  # variable-graph edge only
    objective = _poly(obj)

    budget = _jitter(rng, 0.55 * n_core, 0.1)
    cons = [Constraint("b1", _poly({ms_make([i]): -1.0 for i in core}), ">=", -budget)]
    cons.append(Constraint("s1", _poly({ms_make([i]): 1.0 for i in core}), ">=", 0.0))
    cons.extend(_decoy_rows(rng, decoys, hi_d, share))
    return Problem(n=n, bounds=tuple(bounds), objective=objective,
                   constraints=tuple(cons), var_names=names, family="centrality")


def _shadowprice_instance(rng: np.random.Generator) -> Problem:
    """Core products live in binding rows with real duals; decoys appear
    alone in loose rows (high monomial-graph centrality) but their
    violated squares carry only eps-scale duals."""
    n_core, n_decoy = 4, 3
    n = n_core + n_decoy
    core = range(n_core)
    decoys = range(n_core, n)
    hi_d, share = KNOBS["shadowprice"]
    bounds = [(0.0, 1.0)] * n_core + [(0.0, hi_d)] * n_decoy
    names = tuple([f"c{j+1}" for j in core] + [f"d{k+1}" for k in range(n_decoy)])
    eps = 0.001

    obj: dict[Multiset, float] = {ms_make([i]): _jitter(rng, 1.0) for i in core}
    for d in decoys:
        obj[ms_make([d, d])] = -eps
    objective = _poly(obj)

    anchor_c = np.zeros(n)
    for i in core:
        anchor_c[i] = rng.uniform(0.35, 0.6)

    cons = []
    for k in range(2):  # binding rows holding the core products up
        body_c: dict[Multiset, float] = {}
        for i in core:
            for j in core:
                if i < j and rng.uniform() < 0.85:
                    body_c[ms_make([i, j])] = _jitter(rng, 1.0)
        body = _poly(body_c)
        cons.append(Constraint(f"h{k+1}", body, ">=", float(body.evaluate(anchor_c)) - 0.02))
    for k in range(6):  # loose rows where the decoys appear alone
        body = _poly({ms_make([d]): _jitter(rng, 1.0) for d in decoys})
        cons.append(Constraint(f"l{k+1}", body, ">=", 0.0))
    # slack row carrying the cross monomials: variable-graph edges only
    crosses: dict[Multiset, float] = {}
    for d in decoys:
        for i in core:
            crosses[ms_make([d, i])] = _jitter(rng, eps)
        for d2 in decoys:
            if d < d2:
                crosses[ms_make([d, d2])] = _jitter(rng, eps)
    cons.append(Constraint("x1", _poly(crosses), ">=", 0.0))
    cons.extend(_decoy_rows(rng, decoys, hi_d, share))
    return Problem(n=n, bounds=tuple(bounds), objective=objective,
                   constraints=tuple(cons), var_names=names, family="shadowprice")


def _ranges_instance(rng: np.random.Generator) -> Problem:
    """One seductive wide variable keeps the largest violation for a few
    branchings in a row; the node-range weight abandons it first."""
    n_work = 5
    n = n_work + 1
    s = n_work
    hi_s, share = KNOBS["ranges"]
    bounds = [(0.0, 1.0)] * n_work + [(0.0, hi_s)]
    names = tuple([f"m{j+1}" for j in range(n_work)] + ["s"])
    eps = 0.001

    obj: dict[Multiset, float] = {}
    for i in range(n_work):
        obj[ms_make([i, (i + 1) % n_work])] = -_jitter(rng, 1.0)
        obj[ms_make([i, i])] = -_jitter(rng, 0.4)
    obj[ms_make([s, s])] = -eps
    for i in range(n_work):
        obj[ms_make([s, i])] = -_jitter(rng, eps)  # graph edges only
    objective = _poly(obj)

    budget = _jitter(rng, 0.55 * n_work, 0.1)
    cons = [Constraint("b1", _poly({ms_make([i]): -1.0 for i in range(n_work)}), ">=", -budget)]
    cons.append(Constraint("s1", _poly({ms_make([s]): 1.0, ms_make([0]): 1.0}), ">=", 0.0))
    cons.extend(_decoy_rows(rng, [s], hi_s, share))
    return Problem(n=n, bounds=tuple(bounds), objective=objective,
                   constraints=tuple(cons), var_names=names, family="ranges")


_BUILDERS = {
    "centrality": _centrality_instance,
    "shadowprice": _shadowprice_instance,
    "ranges": _ranges_instance,
}


def regime_instance(family: str, index: int, master_seed: int = 0) -> Problem:
    if family not in _BUILDERS:
        raise ValueError(f"unknown family {family!r}")
    rng = np.random.default_rng([master_seed, REGIME_FAMILIES.index(family), index])
    return _BUILDERS[family](rng)


def regimes_suite(per_family: int = 40, master_seed: int = 0) -> list[Problem]:
    out = []
    for family in REGIME_FAMILIES:
        for i in range(per_family):
            out.append(regime_instance(family, i, master_seed))
    return out


def random_suite(count: int, spec: GenSpec, family: str = "random") -> list[Problem]:
    return [
        generate_random(GenSpec(
            n=spec.n, degree=spec.degree, density=spec.density,
            n_constraints=spec.n_constraints, eq_fraction=spec.eq_fraction,
            seed=spec.seed + i, family=family,
        ))
        for i in range(count)
    ]
