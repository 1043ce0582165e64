"""
Inexact zeroth-order oracle.

Each query returns realization values f(x; eta) plus a bounded perturbation
from a noise channel. A pair query evaluates two points on the same
realization eta and is charged two oracle calls.
"""
from dataclasses import dataclass, field
from enum import Enum
from typing import Tuple, Union

import numpy as np

from .problems import StochasticProblem
from .sampling import RngStream


class NoiseKind(str, Enum):
    NONE = "none"
    UNIFORM_BOUNDED = "uniform"
    RANDOM_SIGN = "sign"
    MANTISSA_TRUNCATE = "mantissa"


@dataclass(frozen=True)
class NoiseChannel:
    """
    Additive oracle noise with |perturbation| <= delta, drawn independently of x.

    For MANTISSA_TRUNCATE, delta is 2^-bits: values are truncated to `bits`
    fractional bits and a random bit is added in the last position.
    """

    kind: NoiseKind = NoiseKind.NONE
    delta: float = 0.0
    bits: int = 0

    def __post_init__(self):
        kind = NoiseKind(self.kind)
        object.__setattr__(self, "kind", kind)
        if kind is NoiseKind.MANTISSA_TRUNCATE:
            if self.bits < 1:
                raise ValueError(f"mantissa channel needs bits >= 1, got {self.bits}")
            object.__setattr__(self, "delta", 2.0 ** -self.bits)
        elif kind is NoiseKind.NONE:
            object.__setattr__(self, "delta", 0.0)
        elif self.delta < 0:
            raise ValueError(f"noise level delta must be nonnegative, got {self.delta}")

    def apply(self, values: np.ndarray, rng: RngStream) -> Tuple[np.ndarray, np.ndarray]:
        """Return (noisy values, perturbations) for an array of exact values."""
        values = np.asarray(values, dtype=float)
        gen = rng.generator
        if self.kind is NoiseKind.NONE or self.delta == 0:
            perturbation = np.zeros_like(values)
        elif self.kind is NoiseKind.UNIFORM_BOUNDED:
            perturbation = gen.uniform(-self.delta, self.delta, values.shape)
        elif self.kind is NoiseKind.RANDOM_SIGN:
            perturbation = self.delta * (2.0 * gen.integers(0, 2, values.shape) - 1.0)
        else:
            quantum = self.delta
            truncated = np.floor(values / quantum) * quantum
            noisy = truncated + quantum * gen.integers(0, 2, values.shape)
            return noisy, noisy - values
        return values + perturbation, perturbation


@dataclass(frozen=True)
class OracleResponse:
    value_a: Union[float, np.ndarray]
    value_b: Union[float, np.ndarray]
    eta_id: int
    calls_charged: int = 2
    perturbation_a: Union[float, np.ndarray] = 0.0
    perturbation_b: Union[float, np.ndarray] = 0.0

    @property
    def difference(self):
        return self.value_a - self.value_b


@dataclass
class ZerothOrderOracle:
    """Two-point oracle over one problem; owns its realization stream and call counter."""

    problem: StochasticProblem
    channel: NoiseChannel
    rng: RngStream
    _calls: int = field(default=0, init=False)
    _draws: int = field(default=0, init=False)

    def query_pair(self, x_a: np.ndarray, x_b: np.ndarray) -> OracleResponse:
        """Noisy f(x_a; eta) and f(x_b; eta) on one shared eta."""
        points = np.stack([np.asarray(x_a, dtype=float), np.asarray(x_b, dtype=float)])
        self.problem.check_domain(points)
        eta = self.problem.sample_noise(self.rng)
        exact = self.problem.eval(points, eta)
        noisy, perturbation = self.channel.apply(exact, self.rng)
        response = OracleResponse(
            value_a=float(noisy[0]),
            value_b=float(noisy[1]),
            eta_id=self._draws,
            perturbation_a=float(perturbation[0]),
            perturbation_b=float(perturbation[1]),
        )
        self._draws += 1
        self._calls += 2
        return response

    def query_pairs(self, x_a: np.ndarray, x_b: np.ndarray) -> OracleResponse:
        """
        Vectorized pair queries: row k of x_a and x_b share realization k.
        Charged two calls per row.
        """
        x_a = np.atleast_2d(np.asarray(x_a, dtype=float))
        points = np.stack([x_a, np.broadcast_to(np.asarray(x_b, dtype=float), x_a.shape)])
        self.problem.check_domain(points)
        size = x_a.shape[0]
        eta = self.problem.sample_noise(self.rng, size)
        exact = self.problem.eval(points, eta)
        noisy, perturbation = self.channel.apply(exact, self.rng)
        response = OracleResponse(
            value_a=noisy[0],
            value_b=noisy[1],
            eta_id=self._draws,
            calls_charged=2 * size,
            perturbation_a=perturbation[0],
            perturbation_b=perturbation[1],
        )
        self._draws += size
        self._calls += 2 * size
        return response

    @property
    def call_count(self) -> int:
        return self._calls


def call_count(oracle: ZerothOrderOracle) -> int:
    """Total oracle calls charged so far."""
    return oracle.call_count
