"""Static instance features for the branching-rule selector.

34 features in six groups: variables, constraints, monomials,
coefficients, global shape, and graph metrics of the two intersection
graphs.  All of them depend only on the instance, never on the search.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, fields

import numpy as np

from .graphs import (
    build_cmig,
    build_vig,
    edge_density,
    modularity_greedy,
    transitivity,
    treewidth_ub,
)
from .model import Problem, ms_degree
from .rlt import collect_dictionary

FEATURE_NAMES: tuple[str, ...] = (
    # variables
    "n_vars",
    "var_density_variance",
    "range_mean",
    "range_median",
    "range_variance",
    "appearances_mean",
    "appearances_variance",
    "pct_vars_no_deg_gt1",
    "pct_vars_no_deg_gt2",
    # constraints
    "n_constraints",
    "pct_eq_constraints",
    "pct_linear_constraints",
    "pct_quadratic_constraints",
    # monomials
    "n_monomials",
    "pct_linear_monomials",
    "pct_quadratic_monomials",
    "pct_linear_rlt_vars",
    "pct_quadratic_rlt_vars",
    "avg_monomial_share_per_row",
    # coefficients
    "coeff_mean",
    "coeff_variance",
    # other
    "degree",
    "po_density",
    "vars_per_constraint",
    "vars_per_degree",
    "rlt_vars_per_constraint",
    "monomials_per_constraint",
    # graphs
    "vig_density",
    "vig_modularity",
    "vig_treewidth",
    "vig_transitivity",
    "cmig_density",
    "cmig_modularity",
    "cmig_treewidth",
)

SCHEMA_VERSION = "rltlab-features-1"


@dataclass(frozen=True)
class FeatureVector:
    values: tuple[float, ...]

    def __post_init__(self):
        if len(self.values) != len(FEATURE_NAMES):
            raise ValueError(f"expected {len(FEATURE_NAMES)} features")
        if not all(math.isfinite(v) for v in self.values):
            raise ValueError("features must be finite")

    def __getitem__(self, name: str) -> float:
        return self.values[FEATURE_NAMES.index(name)]

    def as_dict(self) -> dict[str, float]:
        return dict(zip(FEATURE_NAMES, self.values))

    def as_array(self) -> np.ndarray:
        return np.array(self.values)


def _variance(xs) -> float:
    """Population variance; 0 for empty input."""
    xs = list(xs)
    if not xs:
        return 0.0
    mu = sum(xs) / len(xs)
    return sum((x - mu) ** 2 for x in xs) / len(xs)


def extract_report(problem: Problem) -> tuple[FeatureVector, tuple[str, ...]]:
    """Feature vector plus warnings for degenerate groups."""
    warnings: list[str] = []
    n = problem.n
    big_r = len(problem.constraints)
    delta = problem.degree
    rows = problem.all_polys()           # objective first
    supports = problem.distinct_supports()
    n_mono = len(supports)
    if n_mono == 0:
        warnings.append("no monomials at all (constant problem)")

    # variables
    per_var_mono = np.zeros(n)
    for s in supports:
        for j, _ in s:
            per_var_mono[j] += 1
    densities = per_var_mono / n_mono if n_mono else per_var_mono
    ranges = [hi - lo for lo, hi in problem.bounds]
    appearances = np.zeros(n)
    for poly in rows:
        present = {j for s in poly.supports() for j, _ in s}
        for j in present:
            appearances[j] += 1
    in_deg_gt1 = {j for s in supports if ms_degree(s) > 1 for j, _ in s}
    in_deg_gt2 = {j for s in supports if ms_degree(s) > 2 for j, _ in s}

    # constraints
    eq = sum(1 for c in problem.constraints if c.relation == "=")
    lin = sum(1 for c in problem.constraints if c.poly.degree() <= 1)
    quad = sum(1 for c in problem.constraints if c.poly.degree() == 2)

    # monomials
    mono_lin = sum(1 for s in supports if ms_degree(s) == 1)
    mono_quad = sum(1 for s in supports if ms_degree(s) == 2)
    dictionary = collect_dictionary(problem)
    dict_size = len(dictionary)
    dict_lin = sum(1 for ms in dictionary.columns if ms_degree(ms) == 1)
    dict_quad = sum(1 for ms in dictionary.columns if ms_degree(ms) == 2)
    shares = [len(set(poly.supports())) / n_mono if n_mono else 0.0 for poly in rows]

    # coefficients
    coeffs = [t.coefficient for poly in rows for t in poly.terms]
    if not coeffs:
        warnings.append("no coefficients (empty polynomials)")

    # other
    m_possible = math.comb(n + delta, delta) - 1

    vig = build_vig(problem)
    cmig = build_cmig(problem)
    if not vig.edges:
        warnings.append("variable graph has no edges")
    if not cmig.edges:
        warnings.append("monomial graph has no edges")

    raw = (
        float(n),
        _variance(densities),
        float(np.mean(ranges)),
        float(np.median(ranges)),
        _variance(ranges),
        float(np.mean(appearances)),
        _variance(appearances),
        sum(1 for j in range(n) if j not in in_deg_gt1) / n,
        sum(1 for j in range(n) if j not in in_deg_gt2) / n,
        float(big_r),
        eq / big_r,
        lin / big_r,
        quad / big_r,
        float(n_mono),
        mono_lin / n_mono if n_mono else 0.0,
        mono_quad / n_mono if n_mono else 0.0,
        dict_lin / dict_size if dict_size else 0.0,
        dict_quad / dict_size if dict_size else 0.0,
        float(np.mean(shares)),
        float(np.mean(coeffs)) if coeffs else 0.0,
        _variance(coeffs),
        float(delta),
        n_mono / m_possible if m_possible else 0.0,
        n / big_r,
        n / delta,
        dict_size / big_r,
        n_mono / big_r,
        edge_density(vig),
        modularity_greedy(vig),
        float(treewidth_ub(vig)),
        transitivity(vig),
        edge_density(cmig),
        modularity_greedy(cmig),
        float(treewidth_ub(cmig)),
    )
    return FeatureVector(tuple(float(v) for v in raw)), tuple(warnings)


def extract(problem: Problem) -> FeatureVector:
    return extract_report(problem)[0]
