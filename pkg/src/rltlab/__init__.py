"""Spatial branch-and-bound laboratory for polynomial optimization.

Boxed polynomial programs are relaxed by monomial lifting with
bound-factor rows and solved by best-bound spatial branch and bound.
Six branching rules form a portfolio; per-instance features feed
quantile-regression forests that learn which rule to use.
"""

from .model import (
    GenSpec,
    Monomial,
    Polynomial,
    Problem,
    check_feasible,
    generate_random,
    parse_problem,
    render_problem,
)
from .engine import SolveLimits, SolveTrace, solve, root_info
from .rules import ALL_RULES, RuleId
from .pace import lb_pace, og_pace, normalize, geo_mean, performance_profile
from .features import FEATURE_NAMES, FeatureVector, extract
from .learn import (
    Dataset,
    QrfParams,
    Selector,
    fit_qrf,
    fit_sgbqr,
    predict_quantile,
    select_rule,
    stratified_split,
    train_selector,
)

__version__ = "0.1.0"
