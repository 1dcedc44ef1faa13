import functools

import pytest

from bernstein_risk.aggregate import AggregateModel
from bernstein_risk.alpha import make_alpha
from bernstein_risk.bernstein import gamma_coeffs
from bernstein_risk.counts import total_count_pmf
from bernstein_risk.mixing import GammaClaims, GammaMixing

# Gamma(5, 100) mixing reproduces the m = 1 column of the reference tables
PARETO = GammaMixing(5.0, 100.0)
CLAIMS = GammaClaims(0.5, 0.02)


@functools.lru_cache(maxsize=None)
def build(kind, m, n=2, mixing=PARETO):
    """(grid, gamma, model) for a built-in alpha family; cached across tests."""
    grid = make_alpha(kind, m=m, n=n)
    gamma = gamma_coeffs(grid)
    return grid, gamma, AggregateModel(mixing, total_count_pmf(gamma))


@pytest.fixture
def pareto():
    return PARETO


@pytest.fixture
def claims():
    return CLAIMS
