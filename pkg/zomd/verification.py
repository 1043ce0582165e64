"""
Monte-Carlo verification suites.

Each suite expands into independent checks; every check owns its own RngStream
and returns CheckResult records with the measured value, the target, the
tolerance and the Monte-Carlo standard error. Checks fan out over a joblib pool.
"""
import logging
import math
from enum import Enum
from typing import Callable, List, Optional, Sequence, Tuple

import numpy as np
from joblib import Parallel, delayed

from .config import DEFAULT_THREADS, MC_SAMPLES
from .estimators import (
    EstimatorConfig,
    EstimatorFamily,
    draw_directional_exact,
    draw_smoothed_two_point,
    draw_z_scheme,
    l1_ball_volume,
    l1_sphere_volume,
    l1_volume_ratio,
    smoothed_gradient_fd,
)
from .oracle import NoiseChannel, NoiseKind, ZerothOrderOracle
from .problems import NonsmoothDistL1, ProblemKind, make_problem
from .rates import SLOPE_TOLERANCE, fit_loglog_slope
from .sampling import DirectionScheme, RngStream, ZKind, random_simplex_point, sample_directions, sign_plus
from .schemas import CheckResult, VerificationReport

logger = logging.getLogger(__name__)

# Rows per Monte-Carlo batch
CHUNK = 20_000

# Checks pass within this many combined standard errors
Z_TOLERANCE = 4.0

# Relative slack on the second-moment bounds
MOMENT_SLACK = 0.10

SMOOTHING_RADIUS = 0.1
SCALING_DIMENSIONS = (8, 32, 128)


class Suite(str, Enum):
    UNBIASEDNESS = "unbiasedness"
    VARIANCE_BOUNDS = "variance-bounds"
    VOLUME_RATIO = "volume-ratio"
    MOMENT_BOUNDS = "moment-bounds"


DEFAULT_DIMENSIONS = {
    Suite.UNBIASEDNESS: (2, 4, 8),
    Suite.VARIANCE_BOUNDS: (8, 32),
    Suite.VOLUME_RATIO: (2, 3, 4, 5, 6),
    Suite.MOMENT_BOUNDS: (4, 16, 64),
}


def mc_mean(draw: Callable[[int], np.ndarray], total: int, chunk: int = CHUNK) -> Tuple[np.ndarray, np.ndarray]:
    """
    Mean and standard error of the rows returned by draw(size), accumulated in batches.
    """
    if total < 2:
        raise ValueError(f"need at least two Monte-Carlo samples, got {total}")
    s = s2 = 0.0
    done = 0
    while done < total:
        size = min(chunk, total - done)
        values = np.asarray(draw(size), dtype=float)
        s = s + values.sum(axis=0)
        s2 = s2 + (values ** 2).sum(axis=0)
        done += size
    mean = s / total
    var = np.maximum(s2 / total - mean ** 2, 0.0) * total / (total - 1)
    return mean, np.sqrt(var / total)


def _z_scores(a: np.ndarray, se_a: np.ndarray, b: np.ndarray, se_b: np.ndarray) -> np.ndarray:
    combined = np.sqrt(se_a ** 2 + se_b ** 2)
    diff = np.abs(a - b)
    return np.where(combined > 0, diff / np.where(combined > 0, combined, 1.0), np.where(diff > 1e-12, np.inf, 0.0))


# --- unbiasedness ---

def check_unbiasedness(p: int, n: int, delta: float, mc: int, rng: RngStream) -> CheckResult:
    """MC mean of the smoothed two-point estimator against a finite-difference gradient of f^mu."""
    sphere, ball = {
        1: (DirectionScheme.L1_SPHERE, DirectionScheme.L1_BALL),
        2: (DirectionScheme.L2_SPHERE, DirectionScheme.L2_BALL),
    }[p]
    fixture = rng.substream(0)
    problem = make_problem(ProblemKind.SMOOTH_QUADRATIC, n, fixture)
    x = random_simplex_point(n, fixture)
    channel = NoiseChannel(NoiseKind.UNIFORM_BOUNDED, delta=delta) if delta > 0 else NoiseChannel()
    config = EstimatorConfig(EstimatorFamily.SMOOTHED_TWO_POINT, scheme=sphere, mu=SMOOTHING_RADIUS)
    oracle = ZerothOrderOracle(problem, channel, rng.substream(1))
    directions = rng.substream(2)

    mean, se = mc_mean(lambda size: draw_smoothed_two_point(config, oracle, x, size, directions), mc)
    reference, reference_se = smoothed_gradient_fd(problem, x, SMOOTHING_RADIUS, ball, mc, rng.substream(3))
    z = _z_scores(mean, se, reference, reference_se)
    worst = int(np.argmax(z))
    return CheckResult(
        suite=Suite.UNBIASEDNESS.value,
        name=f"p{p} delta={delta:g}",
        n=n,
        measured=float(z[worst]),
        target=0.0,
        tolerance=Z_TOLERANCE,
        std_error=float(se[worst]),
        passed=bool(z[worst] <= Z_TOLERANCE),
        detail=f"max |E g - grad f^mu| = {np.max(np.abs(mean - reference)):.3g} at coordinate {worst}",
    )


# --- variance bounds ---

def check_second_moments(n: int, mc: int, rng: RngStream) -> List[CheckResult]:
    """
    l2-sphere two-point estimator with noise at its admissible level against
    the l2 and l-infinity second-moment bounds.
    """
    fixture = rng.substream(0)
    problem = make_problem(ProblemKind.SMOOTH_QUADRATIC, n, fixture)
    x = random_simplex_point(n, fixture)
    mu = SMOOTHING_RADIUS
    M2, L2 = problem.M2, problem.L2
    delta = M2 * mu / math.sqrt(96 * n)
    config = EstimatorConfig(EstimatorFamily.SMOOTHED_TWO_POINT, scheme=DirectionScheme.L2_SPHERE, mu=mu)
    oracle = ZerothOrderOracle(problem, NoiseChannel(NoiseKind.UNIFORM_BOUNDED, delta=delta), rng.substream(1))
    directions = rng.substream(2)

    def draw(size):
        g = draw_smoothed_two_point(config, oracle, x, size, directions)
        return np.column_stack([np.sum(g ** 2, axis=1), np.max(np.abs(g), axis=1) ** 2])

    mean, se = mc_mean(draw, mc)
    log_n = math.log(n)
    bounds = (
        3 * n * M2 ** 2 + 0.75 * n ** 2 * L2 ** 2 * mu ** 2 + 12 * n ** 2 * delta ** 2 / mu ** 2,
        4 * log_n * M2 ** 2 + 3 * n * log_n * L2 ** 2 * mu ** 2 + 48 * n * log_n * delta ** 2 / mu ** 2,
    )
    results = []
    for name, measured, error, bound in zip(("E|g|_2^2", "E|g|_inf^2"), mean, se, bounds):
        results.append(CheckResult(
            suite=Suite.VARIANCE_BOUNDS.value,
            name=name,
            n=n,
            measured=float(measured),
            target=float(bound),
            tolerance=MOMENT_SLACK * bound + 3 * error,
            std_error=float(error),
            passed=bool(measured <= (1 + MOMENT_SLACK) * bound + 3 * error),
        ))
    return results


def check_hard_bound(n: int, mc: int, rng: RngStream) -> CheckResult:
    """Every l1-sphere draw under worst-case sign noise obeys |g|_inf <= (M + 2 delta/mu) n."""
    mu, delta = SMOOTHING_RADIUS, 0.05
    problem = NonsmoothDistL1(random_simplex_point(n, rng.substream(0)), noise_radius=0.0)
    config = EstimatorConfig(EstimatorFamily.SMOOTHED_TWO_POINT, scheme=DirectionScheme.L1_SPHERE, mu=mu)
    oracle = ZerothOrderOracle(problem, NoiseChannel(NoiseKind.RANDOM_SIGN, delta=delta), rng.substream(1))
    directions = rng.substream(2)
    bound = (problem.M + 2 * delta / mu) * n

    points = 100
    worst = 0.0
    violations = 0
    for _ in range(points):
        x = random_simplex_point(n, directions)
        g = draw_smoothed_two_point(config, oracle, x, max(mc // points, 1), directions)
        norms = np.max(np.abs(g), axis=1)
        worst = max(worst, float(norms.max()))
        violations += int(np.sum(norms > bound * (1 + 1e-12)))
    return CheckResult(
        suite=Suite.VARIANCE_BOUNDS.value,
        name="max |g|_inf (l1 sphere, sign noise)",
        n=n,
        measured=worst,
        target=bound,
        passed=violations == 0,
        detail=f"{violations} violations",
    )


def check_rademacher_moment(kind: ProblemKind, n: int, mc: int, rng: RngStream) -> CheckResult:
    """E|ZZ^T grad f(x; eta)|_inf^2 <= M2^2 for Rademacher Z."""
    fixture = rng.substream(0)
    problem = make_problem(kind, n, fixture)
    x = random_simplex_point(n, fixture)
    draws = rng.substream(1)
    mean, se = mc_mean(
        lambda size: np.max(np.abs(draw_z_scheme(problem, x, ZKind.RADEMACHER, size, draws)), axis=1) ** 2, mc
    )
    bound = problem.M2 ** 2
    return CheckResult(
        suite=Suite.VARIANCE_BOUNDS.value,
        name=f"rademacher E|g|_inf^2 ({kind.value})",
        n=n,
        measured=float(mean),
        target=bound,
        tolerance=3 * float(se),
        std_error=float(se),
        passed=bool(mean <= bound + 3 * se),
    )


def measure_scaling(scheme: DirectionScheme, n: int, mc: int, rng: RngStream) -> Tuple[float, float]:
    """E|g|_inf^2 / E|grad f(x; eta)|_2^2 for the directional estimator on a quadratic."""
    fixture = rng.substream(0)
    problem = make_problem(ProblemKind.SMOOTH_QUADRATIC, n, fixture)
    x = random_simplex_point(n, fixture)
    draws = rng.substream(1)
    moment, moment_se = mc_mean(
        lambda size: np.max(np.abs(draw_directional_exact(scheme, problem, x, size, draws)), axis=1) ** 2, mc
    )
    scale, _ = mc_mean(
        lambda size: np.sum(problem.grad(np.broadcast_to(x, (size, n)), problem.sample_noise(draws, size)) ** 2, axis=1),
        mc,
    )
    return float(moment / scale), float(moment_se / scale)


# Predicted exponent of n per direction scheme; p=2 is measured after dividing by ln n
SCALING_TARGETS = {
    DirectionScheme.L1_SPHERE: 1.0,
    DirectionScheme.L2_SPHERE: 0.0,
    DirectionScheme.LINF_SPHERE: 2.0,
}


def check_scaling(scheme: DirectionScheme, mc: int, rng: RngStream,
                  dimensions: Sequence[int] = SCALING_DIMENSIONS) -> CheckResult:
    """
    Log-log slope of the normalized second moment over n. The l1 exponent is an
    upper bound, so that check is one-sided.
    """
    ratios = []
    for i, n in enumerate(dimensions):
        ratio, _ = measure_scaling(scheme, n, mc, rng.substream(10 + i))
        ratios.append(ratio / math.log(n) if scheme is DirectionScheme.L2_SPHERE else ratio)
    fit = fit_loglog_slope(dimensions, ratios)
    target = SCALING_TARGETS[scheme]
    if scheme is DirectionScheme.L1_SPHERE:
        passed = fit.slope <= target + SLOPE_TOLERANCE
    else:
        passed = fit.within(target)
    return CheckResult(
        suite=Suite.VARIANCE_BOUNDS.value,
        name=f"slope of E|g|_inf^2 in n ({scheme.value})",
        measured=fit.slope,
        target=target,
        tolerance=SLOPE_TOLERANCE,
        passed=bool(passed),
        detail=", ".join(f"n={n}: {r:.4g}" for n, r in zip(dimensions, ratios)) + f"; r2={fit.r2:.3f}",
    )


# --- volume ratio ---

def check_volume_ratio(n: int, mc: int, rng: RngStream, mu: float = 0.5) -> List[CheckResult]:
    """
    Closed-form volume ratio, and the divergence identity
    E_B[grad phi] = (1/ratio) E_S[phi * sign(e) / sqrt(n)] for phi(v) = exp(<a, v>).
    """
    ratio = l1_volume_ratio(n, mu)
    closed_form = l1_ball_volume(n, mu) / l1_sphere_volume(n, mu)
    results = [CheckResult(
        suite=Suite.VOLUME_RATIO.value,
        name="mu / (n sqrt(n))",
        n=n,
        measured=closed_form,
        target=ratio,
        tolerance=1e-12 * ratio,
        passed=bool(abs(closed_form - ratio) <= 1e-12 * ratio),
    )]

    a = rng.substream(0).generator.uniform(-1.0, 1.0, n)
    balls, spheres = rng.substream(1), rng.substream(2)

    def ball_side(size):
        u = mu * sample_directions(DirectionScheme.L1_BALL, n, size, balls)
        return np.exp(u @ a)[:, None] * a

    def sphere_side(size):
        e = sample_directions(DirectionScheme.L1_SPHERE, n, size, spheres)
        return np.exp(mu * e @ a)[:, None] * sign_plus(e) / (math.sqrt(n) * ratio)

    lhs, lhs_se = mc_mean(ball_side, mc)
    rhs, rhs_se = mc_mean(sphere_side, mc)
    z = _z_scores(lhs, lhs_se, rhs, rhs_se)
    results.append(CheckResult(
        suite=Suite.VOLUME_RATIO.value,
        name="divergence identity residual",
        n=n,
        measured=float(z.max()),
        target=0.0,
        tolerance=Z_TOLERANCE,
        std_error=float(np.max(np.sqrt(lhs_se ** 2 + rhs_se ** 2))),
        passed=bool(z.max() <= Z_TOLERANCE),
    ))
    return results


# --- moment bounds of the samplers ---

def check_sphere_moments(n: int, mc: int, rng: RngStream) -> List[CheckResult]:
    """E|e|_q^2 on the l2 sphere for q in {2, 4, inf}, and E[ee^T] = I/n for small n."""
    draws = rng.substream(0)
    bounds = {2: 1.0, 4: 3.0 * n ** (-0.5), math.inf: 4 * math.log(n) / n}
    ords = list(bounds)

    def draw(size):
        e = sample_directions(DirectionScheme.L2_SPHERE, n, size, draws)
        norms = [np.linalg.norm(e, ord=q, axis=1) ** 2 for q in ords]
        if n <= 16:
            norms.append(np.einsum("ki,kj->kij", e, e).reshape(size, -1))
        return np.column_stack(norms)

    mean, se = mc_mean(draw, mc)
    results = []
    for k, q in enumerate(ords):
        results.append(CheckResult(
            suite=Suite.MOMENT_BOUNDS.value,
            name=f"l2 sphere E|e|_{q:g}^2",
            n=n,
            measured=float(mean[k]),
            target=bounds[q],
            tolerance=3 * float(se[k]) + 1e-12,
            std_error=float(se[k]),
            passed=bool(mean[k] <= bounds[q] + 3 * se[k] + 1e-12),
        ))
    if n <= 16:
        second = mean[len(ords):]
        second_se = se[len(ords):]
        error = float(np.linalg.norm(second - np.eye(n).ravel() / n))
        frobenius_se = float(np.sqrt(np.sum(second_se ** 2)))
        results.append(CheckResult(
            suite=Suite.MOMENT_BOUNDS.value,
            name="l2 sphere E[ee^T] = I/n (Frobenius)",
            n=n,
            measured=error,
            target=0.0,
            tolerance=3 * frobenius_se,
            std_error=frobenius_se,
            passed=bool(error <= 3 * frobenius_se),
        ))
    return results


def check_rademacher_identity(n: int, mc: int, rng: RngStream) -> CheckResult:
    """Entrywise E[ZZ^T] = I for Rademacher Z."""
    draws = rng.substream(0)

    def draw(size):
        z = sample_directions(DirectionScheme.RADEMACHER, n, size, draws)
        return np.einsum("ki,kj->kij", z, z).reshape(size, -1)

    mean, _ = mc_mean(draw, mc)
    error = float(np.max(np.abs(mean - np.eye(n).ravel())))
    tolerance = 5.0 / math.sqrt(mc)
    return CheckResult(
        suite=Suite.MOMENT_BOUNDS.value,
        name="rademacher E[ZZ^T] = I (max entry)",
        n=n,
        measured=error,
        target=0.0,
        tolerance=tolerance,
        std_error=1.0 / math.sqrt(mc),
        passed=error <= tolerance,
    )


def check_cube_boundary(n: int, mc: int, rng: RngStream, width: float = 0.1) -> CheckResult:
    """Share of cube draws within `width` of the boundary against 1 - (1 - width)^n."""
    draws = rng.substream(0)
    mean, se = mc_mean(
        lambda size: (np.max(np.abs(sample_directions(DirectionScheme.LINF_BALL, n, size, draws)), axis=1)
                      >= 1 - width).astype(float),
        mc,
    )
    expected = 1 - (1 - width) ** n
    z = abs(float(mean) - expected) / max(float(se), 1e-300)
    return CheckResult(
        suite=Suite.MOMENT_BOUNDS.value,
        name=f"cube mass within {width:g} of the boundary",
        n=n,
        measured=float(mean),
        target=expected,
        tolerance=Z_TOLERANCE * float(se),
        std_error=float(se),
        passed=bool(z <= Z_TOLERANCE or abs(float(mean) - expected) < 1e-12),
    )


def cube_trend(results: Sequence[CheckResult]) -> CheckResult:
    """Boundary mass must not decrease with n."""
    ordered = sorted(results, key=lambda r: r.n)
    masses = [r.measured for r in ordered]
    increasing = all(b >= a for a, b in zip(masses, masses[1:]))
    return CheckResult(
        suite=Suite.MOMENT_BOUNDS.value,
        name="cube boundary mass grows with n",
        measured=masses[-1] if masses else 0.0,
        target=1.0,
        passed=increasing,
        detail=", ".join(f"n={r.n}: {r.measured:.4f}" for r in ordered),
    )


# --- suites ---

def _tasks(suite: Suite, dimensions: Sequence[int], mc: int) -> List[Tuple[Callable, dict]]:
    tasks = []
    if suite is Suite.UNBIASEDNESS:
        for p in (1, 2):
            for n in dimensions:
                for delta in (0.0, 0.01):
                    tasks.append((check_unbiasedness, {"p": p, "n": n, "delta": delta, "mc": mc}))
    elif suite is Suite.VARIANCE_BOUNDS:
        for n in dimensions:
            tasks.append((check_second_moments, {"n": n, "mc": mc}))
            tasks.append((check_hard_bound, {"n": n, "mc": mc}))
            for kind in ProblemKind:
                tasks.append((check_rademacher_moment, {"kind": kind, "n": n, "mc": mc}))
        for scheme in SCALING_TARGETS:
            tasks.append((check_scaling, {"scheme": scheme, "mc": mc}))
    elif suite is Suite.VOLUME_RATIO:
        for n in dimensions:
            tasks.append((check_volume_ratio, {"n": n, "mc": mc}))
    else:
        for n in dimensions:
            tasks.append((check_sphere_moments, {"n": n, "mc": mc}))
            if n <= 16:
                tasks.append((check_rademacher_identity, {"n": n, "mc": mc}))
            tasks.append((check_cube_boundary, {"n": n, "mc": mc}))
    return tasks


def _run_task(fn: Callable, kwargs: dict, seed: int, stream_id: int) -> List[CheckResult]:
    result = fn(rng=RngStream(seed, stream_id), **kwargs)
    return result if isinstance(result, list) else [result]


def verify_suite(
    which: Sequence[Suite],
    n_list: Optional[Sequence[int]] = None,
    seed: int = 0,
    mc: int = MC_SAMPLES,
    threads: int = DEFAULT_THREADS,
) -> VerificationReport:
    """
    Run the requested suites and collect their checks.

    Args:
        which: suites to run
        n_list: dimensions; each suite has its own default grid
        seed: base seed, each check draws from its own stream id
        mc: Monte-Carlo sample count per check
        threads: joblib workers

    Returns:
        VerificationReport; report.passed is False when any check failed
    """
    suites = [Suite(s) for s in which]
    jobs = []
    for suite in suites:
        dimensions = list(n_list) if n_list else list(DEFAULT_DIMENSIONS[suite])
        jobs.extend(_tasks(suite, dimensions, mc))

    # stream ids 0 and 1 belong to experiment runs
    outputs = Parallel(n_jobs=threads)(
        delayed(_run_task)(fn, kwargs, seed, 2 + i) for i, (fn, kwargs) in enumerate(jobs)
    )
    checks = [check for output in outputs for check in output]

    boundary = [c for c in checks if c.name.startswith("cube mass")]
    if len(boundary) > 1:
        checks.append(cube_trend(boundary))

    for check in checks:
        if not check.passed:
            logger.error(
                f"{check.suite}/{check.name} n={check.n}: measured {check.measured:.6g}, "
                f"target {check.target:.6g}, tolerance {check.tolerance:.3g}"
            )
    report = VerificationReport(suites=[s.value for s in suites], seed=seed, checks=checks)
    logger.info(f"verification: {len(checks) - len(report.failures)}/{len(checks)} checks passed")
    return report
