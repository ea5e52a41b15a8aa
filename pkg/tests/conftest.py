import numpy as np
import pytest

from rltlab.model import parse_problem


@pytest.fixture
def bilinear_problem():
    """min x1*x2 s.t. x1 + x2 >= 0.5 on the unit box."""
    return parse_problem(
        "var x1 in [0,1]; var x2 in [0,1]; min: x1*x2; st c1: x1 + x2 >= 0.5"
    )


@pytest.fixture
def budget_bilinear_problem():
    """max x1*x2 s.t. x1 + x2 <= 1: optimum -0.25 in min form."""
    return parse_problem(
        "var x1 in [0,1]; var x2 in [0,1]; max: x1*x2; st c1: x1 + x2 <= 1"
    )


def poly_eval_grid(poly, pts):
    total = np.full(pts.shape[0], poly.constant)
    for t in poly.terms:
        v = np.full(pts.shape[0], t.coefficient)
        for j, m in t.support:
            v = v * pts[:, j] ** m
        total += v
    return total
