"""
Pytest fixtures for zomd: seeded streams, small problems and a constant test objective.
"""
import numpy as np
import pytest

from zomd.problems import StochasticProblem
from zomd.sampling import RngStream, simplex_center


class ConstantProblem(StochasticProblem):
    """f(x; eta) = value everywhere; every gradient is zero."""

    def __init__(self, n: int, value: float = 5.0):
        super().__init__(n, simplex_center(n), value, 0.0)
        self.constant = value

    def eval(self, x, eta):
        return np.full(np.shape(x)[:-1], self.constant)

    def grad(self, x, eta):
        return np.zeros(np.broadcast_shapes(np.shape(x), np.shape(eta)))

    def value(self, x):
        return np.full(np.shape(x)[:-1], self.constant)

    def gradient(self, x):
        return np.zeros(np.shape(x))

    def lipschitz(self, ord):
        return 0.0

    @property
    def L2(self):
        return 0.0


@pytest.fixture
def rng():
    """Fresh seeded stream per test."""
    return RngStream(12345, 7)


@pytest.fixture
def constant_problem():
    return ConstantProblem(4, 5.0)


@pytest.fixture
def linear_problem():
    """Deterministic linear objective with c = (0.3, 0.1, 0.5, 0.9)."""
    from zomd.problems import LinearNoisy

    return LinearNoisy(np.array([0.3, 0.1, 0.5, 0.9]), noise_radius=0.0)


@pytest.fixture
def quadratic_problem():
    from zomd.problems import SmoothQuadratic

    return SmoothQuadratic(np.array([0.1, 0.2, 0.3, 0.4]), noise_radius=0.05)
