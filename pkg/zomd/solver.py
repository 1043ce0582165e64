"""
Entropic mirror descent on the unit simplex in dual-averaging form.

The solver keeps the running sum s of gradient surrogates and maps it to the
simplex with exponential weights x = softmax(-s / beta_{t+1}), beta_t =
constant * sqrt(t) (divided by sqrt(ln n) for the first two schedules).
Tuning helpers turn a target accuracy eps into mu, delta_max, N and the
schedule constant.
"""
import logging
import math
import time
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Dict, List, NamedTuple, Optional, Tuple, Union

import numpy as np
from scipy.special import softmax

from .config import MU0
from .errors import DomainError, NonFiniteGradientError, TuningError, ZomdError
from .estimators import EstimatorConfig, GradientEstimate, estimate
from .oracle import NoiseChannel, ZerothOrderOracle
from .problems import SimplexPoint, StochasticProblem, optimality_gap
from .sampling import RngStream, simplex_center
from .trace import MAX_TRACE_POINTS, GapTracker

logger = logging.getLogger(__name__)


class ScheduleKind(str, Enum):
    THEOREM1 = "thm1"
    THEOREM2 = "thm2"
    THEOREM3 = "thm3"
    MANUAL = "manual"


@dataclass(frozen=True)
class StepSchedule:
    """
    beta_t = constant * sqrt(t / ln n) for THEOREM1/THEOREM2,
    constant * sqrt(t) otherwise.
    """

    kind: ScheduleKind
    constant: float
    n: int

    def __post_init__(self):
        object.__setattr__(self, "kind", ScheduleKind(self.kind))
        if not (self.constant > 0 and math.isfinite(self.constant)):
            raise ZomdError(f"schedule constant must be positive and finite, got {self.constant}")
        if self.n < 2:
            raise ZomdError(f"schedule needs n >= 2, got {self.n}")

    @property
    def rate(self) -> float:
        if self.kind in (ScheduleKind.THEOREM1, ScheduleKind.THEOREM2):
            return self.constant / math.sqrt(math.log(self.n))
        return self.constant

    def beta(self, t: int) -> float:
        return self.rate * math.sqrt(t)


@dataclass
class DualState:
    s: np.ndarray
    schedule: StepSchedule
    t: int = 0

    @classmethod
    def start(cls, n: int, schedule: StepSchedule) -> "DualState":
        return cls(s=np.zeros(n), schedule=schedule)

    def iterate(self) -> np.ndarray:
        """x^{t+1}: softmax of -s / beta_{t+1}."""
        return softmax(-self.s / self.schedule.beta(self.t + 1))


def _advance(state: DualState, g: np.ndarray) -> np.ndarray:
    if not np.all(np.isfinite(g)):
        raise NonFiniteGradientError(f"non-finite gradient surrogate at step {state.t + 1}")
    state.s = state.s + g
    state.t += 1
    return state.iterate()


def md_step(state: DualState, g: Union[GradientEstimate, np.ndarray]) -> SimplexPoint:
    """
    Add one gradient surrogate to the dual sum and return the next iterate.

    Raises:
        NonFiniteGradientError: g has NaN or infinite entries; state is left untouched
    """
    g = g.g if isinstance(g, GradientEstimate) else np.asarray(g, dtype=float)
    if g.shape != state.s.shape:
        raise ZomdError(f"gradient has shape {g.shape}, dual state has {state.s.shape}")
    return SimplexPoint(_advance(state, g))


# --- tuning rules ---

class Tuning(NamedTuple):
    mu: Optional[float]
    delta_max: Optional[float]
    N: int
    beta_const: float


def _check_eps(eps: float) -> None:
    if not eps > 0:
        raise TuningError(f"eps must be positive, got {eps}")


def _check_sigma(sigma: Optional[float]) -> None:
    if sigma is not None and not 0 < sigma < 1:
        raise TuningError(f"failure probability sigma must lie in (0, 1), got {sigma}")


def theorem1_bound(M: float, n: int, N: int, sigma: Optional[float] = None) -> float:
    """
    Guarantee on f(x_bar) - f* after N exact stochastic subgradient steps.

    In expectation 2M sqrt(ln n / N); with probability 1 - sigma,
    2M / sqrt(N) * (sqrt(ln n) + sqrt(8 ln(1/sigma))).
    """
    _check_sigma(sigma)
    if sigma is None:
        return 2 * M * math.sqrt(math.log(n) / N)
    omega = math.log(1 / sigma)
    return 2 * M / math.sqrt(N) * (math.sqrt(math.log(n)) + math.sqrt(8 * omega))


def tune_theorem1(M: float, n: int, eps: float) -> Tuning:
    """Smallest N with 2M sqrt(ln n / N) <= eps; no smoothing, no oracle noise."""
    _check_eps(eps)
    N = math.ceil(4 * M ** 2 * math.log(n) / eps ** 2)
    return Tuning(mu=None, delta_max=None, N=N, beta_const=M)


def tune_theorem2(M: float, n: int, eps: float, sigma: Optional[float] = None, mu0: float = MU0) -> Tuning:
    """
    Two-point smoothed method on nonsmooth problems.

    Args:
        M: bound on ||grad f(x; eta)||_inf
        n: dimension
        eps: target accuracy
        sigma: failure probability for the high-probability N, None for the expectation form
        mu0: radius of the neighborhood the problem is defined on

    Returns:
        mu = eps/(2M), delta_max = eps/4, N, beta_const = 2Mn
    """
    _check_eps(eps)
    _check_sigma(sigma)
    if not M > 0:
        raise TuningError(f"M must be positive, got {M}")
    mu = eps / (2 * M)
    if mu > mu0:
        raise DomainError(f"mu = eps/(2M) = {mu:.6g} exceeds mu0={mu0}; use a smaller eps or a larger mu0")
    if sigma is None:
        N = math.ceil(64 * M ** 2 * n ** 2 * math.log(n) / eps ** 2)
    else:
        N = math.ceil(128 * M ** 2 * n ** 2 / eps ** 2 * (math.log(n) + 8 * math.log(1 / sigma)))
    return Tuning(mu=mu, delta_max=eps / 4, N=N, beta_const=2 * M * n)


def tune_theorem3(M2: float, L2: float, n: int, eps: float, qbar: float = math.inf, mu0: float = MU0) -> Tuning:
    """
    Two-point l2-sphere method on smooth problems.

    qbar = inf is the simplex setting; qbar = 2 uses the l2 second-moment branch.
    A problem with L2 = 0 has no smoothing bias and gets mu = mu0.
    """
    _check_eps(eps)
    if not math.isfinite(L2):
        raise TuningError("L2 is infinite: the problem is not smooth, use tune_theorem2")
    if qbar not in (2, math.inf):
        raise TuningError(f"qbar must be 2 or inf, got {qbar}")
    if L2 == 0:
        mu = mu0
    else:
        cap_factor = 1 / (6 * n) if math.isinf(qbar) else 4 / (3 * n)
        mu = min(max(eps / (2 * M2), math.sqrt(eps / L2)), M2 / L2 * math.sqrt(cap_factor))
    if mu > mu0:
        raise DomainError(f"tuned mu={mu:.6g} exceeds mu0={mu0}; use a smaller eps or a larger mu0")
    if math.isinf(qbar):
        delta_max = M2 * mu / math.sqrt(96 * n)
        N = math.ceil(80 * M2 ** 2 * math.log(n) ** 2 / eps ** 2)
        beta_const = M2 * math.sqrt(5)
    else:
        delta_max = M2 * mu / math.sqrt(12 * n)
        N = math.ceil(80 * n * M2 ** 2 * math.log(n) / eps ** 2)
        beta_const = M2 * math.sqrt(5 * n / math.log(n))
    return Tuning(mu=mu, delta_max=delta_max, N=N, beta_const=beta_const)


def admissible_mu(eps: float, M: float, L: float) -> float:
    """Largest mu with min{M mu, L mu^2 / 2} <= eps / 2."""
    _check_eps(eps)
    by_lipschitz = eps / (2 * M) if M > 0 else math.inf
    by_smoothness = math.sqrt(eps / L) if L > 0 else math.inf
    return max(by_lipschitz, by_smoothness)


# --- runs ---

@dataclass
class RunReport:
    x_bar: SimplexPoint
    gap_trace: List[Tuple[int, float]]
    final_gap: float
    avg_gap: Optional[float]  # mean gap of the iterates, when tracked
    oracle_calls: int
    config: Dict[str, Any]
    wall_time: float
    warnings: List[str] = field(default_factory=list)


def run(
    problem: StochasticProblem,
    channel: NoiseChannel,
    config: EstimatorConfig,
    schedule: StepSchedule,
    N: int,
    rng: RngStream,
    delta_max: Optional[float] = None,
    trace_points: int = MAX_TRACE_POINTS,
    track_avg_gap: bool = False,
) -> RunReport:
    """
    N mirror-descent iterations from the uniform point, one surrogate draw per step.

    Args:
        problem: objective, also used for the analytic gap
        channel: oracle noise
        config: gradient surrogate
        schedule: beta_t
        N: iterations
        rng: run stream; substream 0 drives directions, substream 1 the oracle
        delta_max: admissible noise for the schedule; a larger channel delta is logged, not refused
        track_avg_gap: also report the mean gap of the iterates x^1..x^N, one extra gap per step

    Returns:
        RunReport with the averaged iterate x_bar = (x^1 + ... + x^N) / N
    """
    if N <= 0:
        raise ZomdError(f"N must be positive, got {N}")
    if schedule.n != problem.n:
        raise ZomdError(f"schedule built for n={schedule.n}, problem has n={problem.n}")
    config.check_against(problem)

    warnings = []
    if delta_max is not None and channel.delta > delta_max:
        message = f"channel delta={channel.delta:.4g} exceeds delta_max={delta_max:.4g} for {schedule.kind.value}"
        logger.warning(message)
        warnings.append(message)

    direction_rng = rng.substream(0)
    oracle = ZerothOrderOracle(problem, channel, rng.substream(1))
    state = DualState.start(problem.n, schedule)
    tracker = GapTracker(N, trace_points)

    started = time.perf_counter()
    x = simplex_center(problem.n)
    x_sum = np.zeros(problem.n)
    gap_sum = 0.0
    for t in range(1, N + 1):
        x_sum += x
        if track_avg_gap:
            gap_sum += optimality_gap(problem, x)
        if tracker.due(t):
            tracker.record(t, optimality_gap(problem, x_sum / t))
        g = estimate(config, problem, oracle, x, direction_rng)
        x = _advance(state, g.g)
    wall_time = time.perf_counter() - started

    x_bar = SimplexPoint(x_sum / N)
    report = RunReport(
        x_bar=x_bar,
        gap_trace=tracker.as_list(),
        final_gap=optimality_gap(problem, x_bar),
        avg_gap=gap_sum / N if track_avg_gap else None,
        oracle_calls=oracle.call_count,
        config={
            "problem": repr(problem),
            "estimator": config.label,
            "mu": config.mu,
            "tau": config.tau,
            "noise": channel.kind.value,
            "delta": channel.delta,
            "schedule": schedule.kind.value,
            "beta_const": schedule.constant,
            "N": N,
            "seed": rng.seed,
        },
        wall_time=wall_time,
        warnings=warnings,
    )
    logger.debug(f"run finished: gap={report.final_gap:.6g}, calls={report.oracle_calls}, {wall_time:.2f}s")
    return report
