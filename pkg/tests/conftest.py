import numpy as np
import pytest

from pointimpact.fpca import center
from pointimpact.gp_sim import Grid, ProcessSpec, simulate_ou
from pointimpact.model_sim import DESIGN_SLOPE, ImpactModelSpec, QuadratureRule, SlopeFunction, generate_response

TWO_IMPACTS = ImpactModelSpec((0.25, 0.75), (2.0, 1.0), SlopeFunction.zero(), 1.0)
TWO_IMPACTS_SLOPE = ImpactModelSpec((0.25, 0.75), (2.0, 1.0), DESIGN_SLOPE, 1.0)
OU = ProcessSpec.ou(5.0, 3.5)


@pytest.fixture
def grid():
    return Grid(0.0, 1.0, 1001)


@pytest.fixture
def rule(grid):
    return QuadratureRule.trapezoid(grid)


def design_data(n=250, p=1001, seed=0, model=TWO_IMPACTS):
    """Centered data from the two-impact OU design."""
    g = Grid(0.0, 1.0, p)
    X = simulate_ou(n, g, 5.0, 3.5, seed)
    y = generate_response(X, model, QuadratureRule.trapezoid(g), seed + 10_000)
    return center(X.with_responses(y))


@pytest.fixture
def ou_design():
    data, means, y_mean = design_data()
    return data
