"""
Gradient surrogates built from two-point oracle queries or from directional
derivatives along random directions.

Every surrogate has a single-draw form used by the solver (returns a
GradientEstimate) and a vectorized draw_* form returning a (size, n) array for
Monte-Carlo checks.
"""
import math
from dataclasses import dataclass
from enum import Enum
from typing import Optional, Tuple

import numpy as np

from .config import FD_STEP
from .errors import DomainError, ZomdError
from .oracle import ZerothOrderOracle
from .problems import DOMAIN_SLACK, ArrayOrPoint, StochasticProblem, as_array
from .sampling import (
    Direction,
    DirectionScheme,
    RngStream,
    ZKind,
    face_index,
    l1_extent,
    sample_directions,
    sample_z,
    sign_plus,
)

TWO_POINT_SCHEMES = (
    DirectionScheme.L1_SPHERE,
    DirectionScheme.L2_SPHERE,
    DirectionScheme.LINF_SPHERE,
    DirectionScheme.LINF_BALL,
)

BALL_SCHEMES = (DirectionScheme.L1_BALL, DirectionScheme.L2_BALL, DirectionScheme.LINF_BALL)


class EstimatorFamily(str, Enum):
    SMOOTHED_TWO_POINT = "smoothed"
    DIRECTIONAL_EXACT = "directional"
    Z_SCHEME = "z"
    Z_FINITE_DIFF = "z-fd"
    STOCHASTIC_SUBGRADIENT = "subgradient"


@dataclass(frozen=True)
class EstimatorConfig:
    family: EstimatorFamily
    scheme: Optional[DirectionScheme] = None
    z_kind: Optional[ZKind] = None
    mu: Optional[float] = None
    tau: Optional[float] = None

    def __post_init__(self):
        family = EstimatorFamily(self.family)
        object.__setattr__(self, "family", family)
        if self.scheme is not None:
            object.__setattr__(self, "scheme", DirectionScheme(self.scheme))
        if self.z_kind is not None:
            object.__setattr__(self, "z_kind", ZKind(self.z_kind))

        if family in (EstimatorFamily.SMOOTHED_TWO_POINT, EstimatorFamily.DIRECTIONAL_EXACT):
            if self.scheme not in TWO_POINT_SCHEMES:
                raise ZomdError(f"{family.value} estimator needs a sphere or cube scheme, got {self.scheme}")
        if family in (EstimatorFamily.Z_SCHEME, EstimatorFamily.Z_FINITE_DIFF) and self.z_kind is None:
            raise ZomdError(f"{family.value} estimator needs a z kind")
        if family is EstimatorFamily.SMOOTHED_TWO_POINT and not (self.mu and self.mu > 0):
            raise ZomdError(f"smoothing radius mu must be positive, got {self.mu}")
        if family is EstimatorFamily.Z_FINITE_DIFF and not (self.tau and self.tau > 0):
            raise ZomdError(f"finite-difference step tau must be positive, got {self.tau}")

    @property
    def two_point(self) -> bool:
        return self.family in (EstimatorFamily.SMOOTHED_TWO_POINT, EstimatorFamily.Z_FINITE_DIFF)

    @property
    def label(self) -> str:
        kind = self.scheme or self.z_kind
        return self.family.value if kind is None else f"{self.family.value}:{kind.value}"

    def step_extent(self, n: int) -> float:
        """Largest l1 norm of a query offset divided by mu (or tau)."""
        kind = self.scheme or self.z_kind
        return 0.0 if kind is None or not self.two_point else l1_extent(kind, n)

    def check_against(self, problem: StochasticProblem) -> None:
        """Every query x + mu e (or x + tau Z) must stay within mu0 of the simplex."""
        extent = self.step_extent(problem.n)
        for name, step in (("mu", self.mu), ("tau", self.tau)):
            if step is None:
                continue
            if step > problem.mu0 or step * extent > problem.mu0 + DOMAIN_SLACK:
                raise DomainError(
                    f"{name}={step} reaches l1 distance {step * extent:.4g} from the simplex for {self.label}, "
                    f"above mu0={problem.mu0}; use {name} <= {problem.mu0 / max(extent, 1.0):.4g} or a larger mu0"
                )


@dataclass(frozen=True)
class GradientEstimate:
    g: np.ndarray
    family: EstimatorFamily
    scheme: str
    prefactor: float
    mu: Optional[float] = None
    stream: Optional[Tuple[int, int, int]] = None  # (seed, stream id, jumps) the draw came from


@dataclass(frozen=True)
class SmoothedValue:
    estimate: float
    std_error: float


def table_vectors(scheme: DirectionScheme, directions: np.ndarray) -> np.ndarray:
    """
    Vectors multiplying the n/mu prefactor, one row per direction: the sign
    vector for the l1 sphere, e itself for the l2 sphere, and the outward face
    basis vector sign(e_i) e_i(e) for the cube.
    """
    directions = np.atleast_2d(directions)
    if scheme is DirectionScheme.L1_SPHERE:
        return sign_plus(directions)
    if scheme is DirectionScheme.L2_SPHERE:
        return directions
    if scheme in (DirectionScheme.LINF_SPHERE, DirectionScheme.LINF_BALL):
        rows = np.arange(directions.shape[0])
        i = face_index(directions)
        vectors = np.zeros_like(directions)
        vectors[rows, i] = sign_plus(directions[rows, i])
        return vectors
    raise ZomdError(f"scheme {scheme} has no two-point estimator")


# --- smoothed two-point estimator ---

def draw_smoothed_two_point(
    config: EstimatorConfig, oracle: ZerothOrderOracle, x: ArrayOrPoint, size: int, rng: RngStream
) -> np.ndarray:
    x = as_array(x)
    n = x.size
    e = sample_directions(config.scheme, n, size, rng)
    response = oracle.query_pairs(x + config.mu * e, x)
    return (n / config.mu) * response.difference[:, None] * table_vectors(config.scheme, e)


def smoothed_two_point(
    config: EstimatorConfig, oracle: ZerothOrderOracle, x: ArrayOrPoint, rng: RngStream
) -> GradientEstimate:
    """
    g = (n / mu) * (f(x + mu e; eta) - f(x; eta) + noise) * v(e), with v(e) from table_vectors.

    One two-point oracle query per draw.
    """
    x = as_array(x)
    n = x.size
    e = sample_directions(config.scheme, n, 1, rng)
    response = oracle.query_pair(x + config.mu * e[0], x)
    prefactor = n / config.mu
    g = prefactor * response.difference * table_vectors(config.scheme, e)[0]
    return GradientEstimate(g, config.family, config.scheme.value, prefactor, config.mu, stream=rng.key)


# --- directional derivative (mu -> 0 limit) ---

def directional_estimate(direction: Direction, gradient: np.ndarray) -> np.ndarray:
    """n * <gradient, e> * v(e) for a fixed direction."""
    e = np.atleast_2d(direction.coords)
    n = e.shape[1]
    return n * float(e[0] @ np.asarray(gradient, dtype=float)) * table_vectors(direction.scheme, e)[0]


def draw_directional_exact(
    scheme: DirectionScheme, problem: StochasticProblem, x: ArrayOrPoint, size: int, rng: RngStream
) -> np.ndarray:
    x = as_array(x)
    n = x.size
    scheme = DirectionScheme(scheme)
    e = sample_directions(scheme, n, size, rng)
    eta = problem.sample_noise(rng, size)
    grads = problem.grad(np.broadcast_to(x, (size, n)), eta)
    return (n * np.sum(grads * e, axis=1))[:, None] * table_vectors(scheme, e)


def directional_exact(
    scheme: DirectionScheme, problem: StochasticProblem, x: ArrayOrPoint, rng: RngStream
) -> GradientEstimate:
    """Unbiased estimate of grad f(x) from one directional derivative of a realization."""
    scheme = DirectionScheme(scheme)
    g = draw_directional_exact(scheme, problem, x, 1, rng)[0]
    n = float(as_array(x).size)
    return GradientEstimate(g, EstimatorFamily.DIRECTIONAL_EXACT, scheme.value, n, stream=rng.key)


# --- Z randomization ---

def draw_z_scheme(problem: StochasticProblem, x: ArrayOrPoint, z_kind: ZKind, size: int, rng: RngStream) -> np.ndarray:
    x = as_array(x)
    n = x.size
    z = sample_z(z_kind, n, size, rng)
    eta = problem.sample_noise(rng, size)
    grads = problem.grad(np.broadcast_to(x, (size, n)), eta)
    return np.sum(grads * z, axis=1)[:, None] * z


def z_scheme(problem: StochasticProblem, x: ArrayOrPoint, z_kind: ZKind, rng: RngStream) -> GradientEstimate:
    """g = <grad f(x; eta), Z> Z = Z Z^T grad f(x; eta)."""
    z_kind = ZKind(z_kind)
    g = draw_z_scheme(problem, x, z_kind, 1, rng)[0]
    return GradientEstimate(g, EstimatorFamily.Z_SCHEME, z_kind.value, 1.0, stream=rng.key)


def draw_z_finite_diff(
    oracle: ZerothOrderOracle, x: ArrayOrPoint, z_kind: ZKind, tau: float, size: int, rng: RngStream
) -> np.ndarray:
    x = as_array(x)
    z = sample_z(z_kind, x.size, size, rng)
    response = oracle.query_pairs(x + tau * z, x)
    return (response.difference / tau)[:, None] * z


def z_finite_diff(
    oracle: ZerothOrderOracle, x: ArrayOrPoint, z_kind: ZKind, tau: float, rng: RngStream
) -> GradientEstimate:
    """
    g = (f(x + tau Z; eta) - f(x; eta)) / tau * Z.

    Biased for curved objectives; the bias shrinks with tau.
    """
    x = as_array(x)
    z_kind = ZKind(z_kind)
    z = sample_z(z_kind, x.size, 1, rng)[0]
    response = oracle.query_pair(x + tau * z, x)
    g = (response.difference / tau) * z
    return GradientEstimate(g, EstimatorFamily.Z_FINITE_DIFF, z_kind.value, 1.0 / tau, tau, stream=rng.key)


def stochastic_subgradient(problem: StochasticProblem, x: ArrayOrPoint, rng: RngStream) -> GradientEstimate:
    """Exact stochastic subgradient grad f(x; eta), no oracle calls."""
    x = as_array(x)
    g = problem.grad(x, problem.sample_noise(rng))
    return GradientEstimate(np.asarray(g, dtype=float), EstimatorFamily.STOCHASTIC_SUBGRADIENT, "exact", 1.0,
                            stream=rng.key)


def estimate(
    config: EstimatorConfig,
    problem: StochasticProblem,
    oracle: ZerothOrderOracle,
    x: ArrayOrPoint,
    rng: RngStream,
) -> GradientEstimate:
    """One draw of the surrogate named by config."""
    family = config.family
    if family is EstimatorFamily.SMOOTHED_TWO_POINT:
        return smoothed_two_point(config, oracle, x, rng)
    if family is EstimatorFamily.DIRECTIONAL_EXACT:
        return directional_exact(config.scheme, problem, x, rng)
    if family is EstimatorFamily.Z_SCHEME:
        return z_scheme(problem, x, config.z_kind, rng)
    if family is EstimatorFamily.Z_FINITE_DIFF:
        return z_finite_diff(oracle, x, config.z_kind, config.tau, rng)
    return stochastic_subgradient(problem, x, rng)


# --- smoothed objective ---

def _ball_points(problem: StochasticProblem, x: np.ndarray, mu: float, scheme: DirectionScheme,
                 n_mc: int, rng: RngStream) -> Tuple[np.ndarray, np.ndarray]:
    scheme = DirectionScheme(scheme)
    if scheme not in BALL_SCHEMES:
        raise ZomdError(f"smoothing needs a ball scheme, got {scheme.value}")
    if mu * l1_extent(scheme, x.size) > problem.mu0 + DOMAIN_SLACK:
        raise DomainError(f"mu={mu} takes {scheme.value} points beyond mu0={problem.mu0} of the simplex")
    points = x + mu * sample_directions(scheme, x.size, n_mc, rng)
    return points, problem.sample_noise(rng, n_mc)


def smoothed_value(
    problem: StochasticProblem,
    x: ArrayOrPoint,
    mu: float,
    scheme: DirectionScheme,
    n_mc: int,
    rng: RngStream,
) -> SmoothedValue:
    """Monte-Carlo estimate of f^mu(x) = E[f(x + mu u; eta)], u uniform in the unit ball."""
    points, eta = _ball_points(problem, as_array(x), mu, scheme, n_mc, rng)
    values = problem.eval(points, eta)
    return SmoothedValue(float(values.mean()), float(values.std(ddof=1) / math.sqrt(n_mc)))


def smoothed_gradient_fd(
    problem: StochasticProblem,
    x: ArrayOrPoint,
    mu: float,
    scheme: DirectionScheme,
    n_mc: int,
    rng: RngStream,
    step: float = FD_STEP,
) -> Tuple[np.ndarray, np.ndarray]:
    """
    Central finite difference of f^mu with common random numbers on both sides.

    Returns:
        (gradient estimate, componentwise standard error)
    """
    x = as_array(x)
    points, eta = _ball_points(problem, x, mu, scheme, n_mc, rng)
    grad = np.empty(x.size)
    se = np.empty(x.size)
    for j in range(x.size):
        shift = np.zeros(x.size)
        shift[j] = step
        quotient = (problem.eval(points + shift, eta) - problem.eval(points - shift, eta)) / (2 * step)
        grad[j] = quotient.mean()
        se[j] = quotient.std(ddof=1) / math.sqrt(n_mc)
    return grad, se


# --- constants ---

def l1_sphere_volume(n: int, mu: float) -> float:
    """Surface measure of the l1 sphere of radius mu: 2^n sqrt(n) mu^(n-1) / (n-1)!."""
    return math.exp(n * math.log(2) + 0.5 * math.log(n) + (n - 1) * math.log(mu) - math.lgamma(n))


def l1_ball_volume(n: int, mu: float) -> float:
    """Volume of the l1 ball of radius mu: 2^n mu^n / n!."""
    return math.exp(n * math.log(2) + n * math.log(mu) - math.lgamma(n + 1))


def l1_volume_ratio(n: int, mu: float) -> float:
    """Vol(B_1^n(mu)) / Vol(S_1^n(mu)) = mu / (n sqrt(n))."""
    if n < 2 or mu <= 0:
        raise ZomdError(f"volume ratio needs n >= 2 and mu > 0, got n={n}, mu={mu}")
    return mu / (n * math.sqrt(n))


def smoothing_bias_bound(M: float, L: float, mu: float) -> float:
    """Upper bound on f^mu - f: min{M mu, L mu^2 / 2}."""
    return min(M * mu, L * mu ** 2 / 2)


# Estimator names accepted on the command line: (family, direction scheme, z kind)
NAMED_ESTIMATORS = {
    "p1": (EstimatorFamily.SMOOTHED_TWO_POINT, DirectionScheme.L1_SPHERE, None),
    "p2": (EstimatorFamily.SMOOTHED_TWO_POINT, DirectionScheme.L2_SPHERE, None),
    "pinf": (EstimatorFamily.SMOOTHED_TWO_POINT, DirectionScheme.LINF_SPHERE, None),
    "pinf-cube": (EstimatorFamily.SMOOTHED_TWO_POINT, DirectionScheme.LINF_BALL, None),
    "rademacher": (EstimatorFamily.Z_FINITE_DIFF, None, ZKind.RADEMACHER),
    "coordinate": (EstimatorFamily.Z_FINITE_DIFF, None, ZKind.COORDINATE),
    "gaussian": (EstimatorFamily.Z_FINITE_DIFF, None, ZKind.SCALED_GAUSSIAN),
    "z-rademacher": (EstimatorFamily.Z_SCHEME, None, ZKind.RADEMACHER),
    "z-coordinate": (EstimatorFamily.Z_SCHEME, None, ZKind.COORDINATE),
    "z-gaussian": (EstimatorFamily.Z_SCHEME, None, ZKind.SCALED_GAUSSIAN),
    "directional-p1": (EstimatorFamily.DIRECTIONAL_EXACT, DirectionScheme.L1_SPHERE, None),
    "directional-p2": (EstimatorFamily.DIRECTIONAL_EXACT, DirectionScheme.L2_SPHERE, None),
    "directional-pinf": (EstimatorFamily.DIRECTIONAL_EXACT, DirectionScheme.LINF_SPHERE, None),
    "subgradient": (EstimatorFamily.STOCHASTIC_SUBGRADIENT, None, None),
}


def named_estimator(name: str, mu: Optional[float] = None, tau: Optional[float] = None) -> EstimatorConfig:
    """EstimatorConfig for a command-line estimator name; mu/tau are dropped where unused."""
    if name not in NAMED_ESTIMATORS:
        raise ZomdError(f"unknown estimator {name!r}; choose from {', '.join(NAMED_ESTIMATORS)}")
    family, scheme, z_kind = NAMED_ESTIMATORS[name]
    return EstimatorConfig(
        family=family,
        scheme=scheme,
        z_kind=z_kind,
        mu=mu if family is EstimatorFamily.SMOOTHED_TWO_POINT else None,
        tau=tau if family is EstimatorFamily.Z_FINITE_DIFF else None,
    )
