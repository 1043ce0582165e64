"""
Synthetic stochastic objectives on a neighborhood of the unit simplex.

Each fixture knows its minimizer, its optimal value and the Lipschitz constants
used by the tuning rules: M (l-infinity bound on stochastic subgradients),
M1/M2/Minf (Lipschitz constants with respect to the l1, l2 and l-infinity
norms) and L2 (gradient Lipschitz constant, infinite for nonsmooth fixtures).
Noise eta is uniform on [-r, r]^n, so the bounds hold with probability 1.
"""
from dataclasses import dataclass
from enum import Enum
from typing import Optional, Sequence, Union

import numpy as np

from .config import MU0
from .errors import DomainError, InvalidDimensionError
from .sampling import RngStream, random_simplex_point, sign_plus, simplex_center, simplex_l1_distance

# Slack on the neighborhood test, to absorb rounding in x + mu * e
DOMAIN_SLACK = 1e-9

SIMPLEX_TOL = 1e-9


class ProblemKind(str, Enum):
    LINEAR_NOISY = "linear"
    NONSMOOTH_DIST_L1 = "distl1"
    SMOOTH_QUADRATIC = "quad"
    MAX_OF_LINEAR = "maxlin"


# Noise radius r per fixture when the caller does not pick one
DEFAULT_NOISE_RADIUS = {
    ProblemKind.LINEAR_NOISY: 0.5,
    ProblemKind.NONSMOOTH_DIST_L1: 0.1,
    ProblemKind.SMOOTH_QUADRATIC: 0.05,
    ProblemKind.MAX_OF_LINEAR: 0.1,
}


@dataclass(frozen=True)
class SimplexPoint:
    coords: np.ndarray

    def __post_init__(self):
        coords = np.asarray(self.coords, dtype=float)
        if coords.ndim != 1 or coords.size < 2:
            raise InvalidDimensionError(f"simplex point needs a vector of length >= 2, got shape {coords.shape}")
        if coords.min() < 0 or abs(coords.sum() - 1.0) > SIMPLEX_TOL:
            raise DomainError(f"not a simplex point: min={coords.min():.3g}, sum={coords.sum():.12g}")
        object.__setattr__(self, "coords", coords)

    @property
    def n(self) -> int:
        return self.coords.size


ArrayOrPoint = Union[np.ndarray, SimplexPoint, Sequence[float]]


def as_array(x: ArrayOrPoint) -> np.ndarray:
    if isinstance(x, SimplexPoint):
        return x.coords
    return np.asarray(x, dtype=float)


class StochasticProblem:
    """
    Base class for test objectives f(x) = E_eta[f(x; eta)].

    Subclasses implement eval/grad for realizations, the analytic value and
    gradient, and lipschitz(ord) = sup ||grad(x; eta)||_ord over the
    mu0-neighborhood. eval and grad broadcast over leading axes.
    """

    kind: ProblemKind

    def __init__(self, n: int, x_star: np.ndarray, f_star: float, noise_radius: float, mu0: float = MU0):
        if n < 2:
            raise InvalidDimensionError(f"dimension must be at least 2, got {n}")
        if noise_radius < 0:
            raise ValueError(f"noise radius must be nonnegative, got {noise_radius}")
        self.n = n
        self.x_star = SimplexPoint(x_star).coords
        self.f_star = float(f_star)
        self.noise_radius = float(noise_radius)
        self.mu0 = float(mu0)

    # --- realizations ---

    def sample_noise(self, rng: RngStream, size: Optional[int] = None) -> np.ndarray:
        shape = (self.n,) if size is None else (size, self.n)
        if self.noise_radius == 0:
            return np.zeros(shape)
        return rng.generator.uniform(-self.noise_radius, self.noise_radius, shape)

    def eval(self, x: np.ndarray, eta: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def grad(self, x: np.ndarray, eta: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    # --- analytic objective ---

    def value(self, x: ArrayOrPoint) -> np.ndarray:
        raise NotImplementedError

    def gradient(self, x: ArrayOrPoint) -> np.ndarray:
        raise NotImplementedError

    def lipschitz(self, ord: float) -> float:
        raise NotImplementedError

    @property
    def M1(self) -> float:
        return self.lipschitz(np.inf)

    @property
    def M2(self) -> float:
        return self.lipschitz(2)

    @property
    def Minf(self) -> float:
        return self.lipschitz(1)

    @property
    def M(self) -> float:
        """Bound on ||grad(x; eta)||_inf."""
        return self.M1

    @property
    def L2(self) -> float:
        return np.inf

    # --- domain ---

    def in_neighborhood(self, x: np.ndarray) -> np.ndarray:
        return simplex_l1_distance(x) <= self.mu0 + DOMAIN_SLACK

    def check_domain(self, x: np.ndarray) -> None:
        """Raise DomainError when any row of x leaves the mu0-neighborhood."""
        worst = float(np.max(simplex_l1_distance(x)))
        if worst > self.mu0 + DOMAIN_SLACK:
            raise DomainError(
                f"query at l1 distance {worst:.4g} from the simplex exceeds mu0={self.mu0}; "
                "reduce mu/tau"
            )

    def _vertex_distance(self, ord: float) -> float:
        # sup over the neighborhood of ||x - x*||_ord; the sup over the simplex sits at a vertex
        vertices = np.eye(self.n)
        return self.mu0 + float(np.max(np.linalg.norm(vertices - self.x_star, ord=ord, axis=1)))

    def _noise_norm(self, ord: float) -> float:
        return self.noise_radius * self.n ** (0.0 if np.isinf(ord) else 1.0 / ord)

    def __repr__(self) -> str:
        return f"{type(self).__name__}(n={self.n}, r={self.noise_radius}, f*={self.f_star:.6g})"


class LinearNoisy(StochasticProblem):
    """f(x; eta) = <c + eta, x>, minimized at the vertex of the smallest c_i."""

    kind = ProblemKind.LINEAR_NOISY

    def __init__(self, c: np.ndarray, noise_radius: float, mu0: float = MU0):
        c = np.asarray(c, dtype=float)
        n = c.size
        x_star = np.zeros(n)
        x_star[int(np.argmin(c))] = 1.0
        super().__init__(n, x_star, float(np.min(c)), noise_radius, mu0)
        self.c = c

    def eval(self, x, eta):
        return np.sum((self.c + eta) * x, axis=-1)

    def grad(self, x, eta):
        return np.broadcast_to(self.c + eta, np.broadcast_shapes(np.shape(x), np.shape(eta))).copy()

    def value(self, x):
        return as_array(x) @ self.c

    def gradient(self, x):
        return np.broadcast_to(self.c, np.shape(as_array(x))).copy()

    def lipschitz(self, ord):
        return float(np.linalg.norm(np.abs(self.c) + self.noise_radius, ord=ord))

    @property
    def L2(self):
        return 0.0


class NonsmoothDistL1(StochasticProblem):
    """f(x; eta) = ||x - x*||_1 + <eta, x>."""

    kind = ProblemKind.NONSMOOTH_DIST_L1

    def __init__(self, x_star: np.ndarray, noise_radius: float, mu0: float = MU0):
        x_star = np.asarray(x_star, dtype=float)
        super().__init__(x_star.size, x_star, 0.0, noise_radius, mu0)

    def eval(self, x, eta):
        return np.sum(np.abs(x - self.x_star), axis=-1) + np.sum(eta * x, axis=-1)

    def grad(self, x, eta):
        return sign_plus(x - self.x_star) + eta

    def value(self, x):
        return np.sum(np.abs(as_array(x) - self.x_star), axis=-1)

    def gradient(self, x):
        return sign_plus(as_array(x) - self.x_star)

    def lipschitz(self, ord):
        return float(np.linalg.norm(np.full(self.n, 1.0 + self.noise_radius), ord=ord))


class SmoothQuadratic(StochasticProblem):
    """f(x; eta) = 0.5 * ||x - x* + eta||_2^2; f(x) = 0.5 * ||x - x*||^2 + n r^2 / 6."""

    kind = ProblemKind.SMOOTH_QUADRATIC

    def __init__(self, x_star: np.ndarray, noise_radius: float, mu0: float = MU0):
        x_star = np.asarray(x_star, dtype=float)
        n = x_star.size
        super().__init__(n, x_star, n * noise_radius ** 2 / 6.0, noise_radius, mu0)

    def eval(self, x, eta):
        return 0.5 * np.sum((x - self.x_star + eta) ** 2, axis=-1)

    def grad(self, x, eta):
        return x - self.x_star + eta

    def value(self, x):
        return 0.5 * np.sum((as_array(x) - self.x_star) ** 2, axis=-1) + self.f_star

    def gradient(self, x):
        return as_array(x) - self.x_star

    def lipschitz(self, ord):
        return self._vertex_distance(ord) + self._noise_norm(ord)

    @property
    def L2(self):
        return 1.0


class MaxOfLinear(StochasticProblem):
    """
    f(x; eta) = max_i <a_i, x> + <eta, x> with a_i = scale * e_i + shift * 1.
    By symmetry the minimizer is the center of the simplex, f* = scale / n + shift.
    """

    kind = ProblemKind.MAX_OF_LINEAR

    def __init__(self, n: int, scale: float, shift: float, noise_radius: float, mu0: float = MU0):
        if scale <= 0:
            raise ValueError(f"scale must be positive, got {scale}")
        super().__init__(n, simplex_center(n), scale / n + shift, noise_radius, mu0)
        self.A = scale * np.eye(n) + shift

    def eval(self, x, eta):
        return np.max(x @ self.A.T, axis=-1) + np.sum(eta * x, axis=-1)

    def grad(self, x, eta):
        # first maximizing index
        active = np.argmax(np.asarray(x) @ self.A.T, axis=-1)
        return self.A[active] + eta

    def value(self, x):
        return np.max(as_array(x) @ self.A.T, axis=-1)

    def gradient(self, x):
        return self.A[np.argmax(as_array(x) @ self.A.T, axis=-1)]

    def lipschitz(self, ord):
        return float(np.linalg.norm(np.abs(self.A[0]) + self.noise_radius, ord=ord))


def make_problem(
    kind: ProblemKind,
    n: int,
    rng: RngStream,
    noise_radius: Optional[float] = None,
    c: Optional[Sequence[float]] = None,
    x_star: Optional[Sequence[float]] = None,
    mu0: float = MU0,
) -> StochasticProblem:
    """
    Build a test objective.

    Args:
        kind: fixture name
        n: dimension, at least 2
        rng: stream for the random parts of the fixture
        noise_radius: r of the uniform noise; 0 makes realizations deterministic
        c: cost vector for the linear fixture
        x_star: minimizer for the l1-distance and quadratic fixtures

    Returns:
        The problem instance
    """
    kind = ProblemKind(kind)
    if n < 2:
        raise InvalidDimensionError(f"dimension must be at least 2, got {n}")
    r = DEFAULT_NOISE_RADIUS[kind] if noise_radius is None else noise_radius

    def _vector(values, name):
        vec = np.asarray(values, dtype=float)
        if vec.shape != (n,):
            raise InvalidDimensionError(f"{name} must have length {n}, got shape {vec.shape}")
        return vec

    if kind is ProblemKind.LINEAR_NOISY:
        cost = _vector(c, "c") if c is not None else rng.generator.uniform(0.0, 1.0, n)
        return LinearNoisy(cost, r, mu0)
    if kind is ProblemKind.NONSMOOTH_DIST_L1:
        target = _vector(x_star, "x_star") if x_star is not None else random_simplex_point(n, rng)
        return NonsmoothDistL1(target, r, mu0)
    if kind is ProblemKind.SMOOTH_QUADRATIC:
        target = _vector(x_star, "x_star") if x_star is not None else random_simplex_point(n, rng, 0.5)
        return SmoothQuadratic(target, r, mu0)
    scale, shift = rng.generator.uniform(0.5, 1.5), rng.generator.uniform(0.0, 1.0)
    return MaxOfLinear(n, scale, shift, r, mu0)


def optimality_gap(problem: StochasticProblem, x: ArrayOrPoint) -> float:
    """f(x) - f* using the analytic objective."""
    return float(problem.value(x)) - problem.f_star
