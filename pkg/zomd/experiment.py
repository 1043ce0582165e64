"""
Replicated experiments: resolve an ExperimentSpec into a concrete plan (problem,
oracle channel, estimator, schedule, N), run the replications in a joblib
worker pool and write the result rows.
"""
import csv
import logging
import math
from dataclasses import dataclass
from itertools import product
from pathlib import Path
from typing import Iterable, List, Optional, Sequence, Tuple

import numpy as np
from joblib import Parallel, delayed

from .config import DEFAULT_THREADS, PROBLEM_STREAM, RUN_STREAM
from .errors import TuningError
from .estimators import EstimatorConfig, EstimatorFamily, NAMED_ESTIMATORS, named_estimator
from .oracle import NoiseChannel, NoiseKind
from .problems import StochasticProblem, make_problem
from .sampling import RngStream, l1_extent
from .schemas import CSV_COLUMNS, ExperimentSpec, ResultRow
from .solver import (
    RunReport,
    ScheduleKind,
    StepSchedule,
    admissible_mu,
    run,
    theorem1_bound,
    tune_theorem1,
    tune_theorem2,
    tune_theorem3,
)
from .trace import mean_trace

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class Plan:
    spec: ExperimentSpec
    problem: StochasticProblem
    channel: NoiseChannel
    config: EstimatorConfig
    schedule: StepSchedule
    N: int
    delta_max: Optional[float]
    bound: float


@dataclass(frozen=True)
class ExperimentResult:
    row: ResultRow
    trace: List[dict]
    reports: List[RunReport]


def _cap_step(
    spec: ExperimentSpec, problem: StochasticProblem, step: float, delta_max: Optional[float]
) -> Tuple[float, Optional[float]]:
    """
    Shrink an automatic mu (or tau) so that every query stays within mu0 of
    the simplex. The noise budget is linear in mu and shrinks with it.
    """
    family, scheme, z_kind = NAMED_ESTIMATORS[spec.estimator]
    extent = l1_extent(scheme or z_kind, problem.n)
    cap = problem.mu0 / extent
    if step <= cap:
        return step, delta_max
    logger.warning(
        f"{spec.experiment}: automatic step {step:.4g} capped to {cap:.4g} for {spec.estimator} "
        f"(l1 extent {extent:.4g}, mu0={problem.mu0})"
    )
    if delta_max is not None and family is EstimatorFamily.SMOOTHED_TWO_POINT:
        delta_max *= cap / step
    return cap, delta_max


def resolve_plan(spec: ExperimentSpec) -> Plan:
    """
    Fill in everything an ExperimentSpec leaves to the tuning rules.

    mu, N and delta default to the schedule's tuned values; the manual schedule
    uses beta (default M) and reports an infinite bound.
    """
    problem = make_problem(
        spec.problem, spec.n, RngStream(spec.seed, PROBLEM_STREAM),
        noise_radius=spec.noise_radius, mu0=spec.mu0,
    )
    n = problem.n
    family = NAMED_ESTIMATORS[spec.estimator][0]
    tuned_mu = None
    delta_max = None

    if spec.schedule is ScheduleKind.THEOREM1:
        N = spec.N or tune_theorem1(problem.M, n, spec.eps).N
        constant = problem.M
        bound = theorem1_bound(problem.M, n, N, spec.sigma)
    elif spec.schedule is ScheduleKind.THEOREM2:
        tuning = tune_theorem2(problem.M, n, spec.eps, spec.sigma, problem.mu0)
        N = spec.N or tuning.N
        tuned_mu, delta_max, constant = tuning.mu, tuning.delta_max, tuning.beta_const
        bound = spec.eps
    elif spec.schedule is ScheduleKind.THEOREM3:
        tuning = tune_theorem3(problem.M2, problem.L2, n, spec.eps, spec.qbar, problem.mu0)
        N = spec.N or tuning.N
        tuned_mu, delta_max, constant = tuning.mu, tuning.delta_max, tuning.beta_const
        bound = spec.eps
    else:
        if spec.N is None:
            raise TuningError("the manual schedule needs an explicit N")
        N = spec.N
        constant = spec.beta or problem.M
        bound = math.inf

    mu = spec.mu
    needs_mu = family is EstimatorFamily.SMOOTHED_TWO_POINT or (
        family is EstimatorFamily.Z_FINITE_DIFF and spec.tau is None
    )
    if mu is None and needs_mu:
        if tuned_mu is not None:
            mu = tuned_mu
        elif spec.eps is not None:
            mu = min(admissible_mu(spec.eps, problem.M, problem.L2), problem.mu0)
        else:
            raise TuningError(f"estimator {spec.estimator} needs mu, or eps to derive it")
        mu, delta_max = _cap_step(spec, problem, mu, delta_max)
    tau = spec.tau if spec.tau is not None else mu
    config = named_estimator(spec.estimator, mu=mu, tau=tau)
    config.check_against(problem)

    if spec.noise is NoiseKind.NONE:
        channel = NoiseChannel()
    elif spec.noise is NoiseKind.MANTISSA_TRUNCATE:
        channel = NoiseChannel(NoiseKind.MANTISSA_TRUNCATE, bits=spec.bits)
    else:
        delta = spec.delta if spec.delta is not None else delta_max
        if delta is None:
            raise TuningError(f"noise {spec.noise.value} needs delta under schedule {spec.schedule.value}")
        channel = NoiseChannel(spec.noise, delta=delta)

    schedule = StepSchedule(spec.schedule, constant, n)
    logger.info(
        f"{spec.experiment}: {problem!r}, estimator={config.label}, mu={config.mu}, tau={config.tau}, "
        f"delta={channel.delta:.4g} (max {delta_max}), N={N}, beta_const={constant:.6g}"
    )
    return Plan(spec, problem, channel, config, schedule, N, delta_max, bound)


def _replicate(plan: Plan, seed: int) -> RunReport:
    return run(
        plan.problem, plan.channel, plan.config, plan.schedule, plan.N,
        RngStream(seed, RUN_STREAM), delta_max=plan.delta_max,
    )


def execute(spec: ExperimentSpec, threads: int = DEFAULT_THREADS, timing: bool = False) -> ExperimentResult:
    """Run spec.reps replications with seeds seed, seed+1, ... and summarize them in one row."""
    plan = resolve_plan(spec)
    seeds = range(spec.seed, spec.seed + spec.reps)
    reports = Parallel(n_jobs=threads)(delayed(_replicate)(plan, seed) for seed in seeds)

    gaps = np.array([report.final_gap for report in reports])
    gap_mean = float(gaps.mean())
    gap_se = float(gaps.std(ddof=1) / math.sqrt(gaps.size))
    row = ResultRow(
        experiment=spec.experiment,
        n=plan.problem.n,
        scheme=spec.estimator,
        delta=plan.channel.delta,
        N=plan.N,
        gap_mean=gap_mean,
        gap_se=gap_se,
        bound=plan.bound,
        bound_ok=gap_mean <= plan.bound,
        oracle_calls=reports[0].oracle_calls,
        seconds=round(sum(report.wall_time for report in reports), 3) if timing else 0.0,
    )
    if not row.bound_ok:
        logger.warning(f"{spec.experiment}: mean gap {gap_mean:.4g} above bound {plan.bound:.4g}")
    trace = [{"experiment": spec.experiment, **point} for point in mean_trace([r.gap_trace for r in reports])]
    return ExperimentResult(row=row, trace=trace, reports=reports)


# --- output ---

def write_rows(rows: Iterable[ResultRow], path: str, fmt: str = "csv") -> None:
    """
    Write rows sorted by experiment id, as CSV (LF line endings) or JSON lines.
    """
    rows = sorted(rows, key=lambda row: row.experiment)
    target = Path(path)
    if fmt == "jsonl":
        with target.open("w", encoding="utf-8", newline="\n") as f:
            for row in rows:
                f.write(row.model_dump_json() + "\n")
        return
    if fmt != "csv":
        raise ValueError(f"unknown output format {fmt!r}")
    with target.open("w", encoding="utf-8", newline="") as f:
        writer = csv.DictWriter(f, fieldnames=list(CSV_COLUMNS), lineterminator="\n")
        writer.writeheader()
        for row in rows:
            record = row.model_dump()
            record["bound_ok"] = "true" if row.bound_ok else "false"
            writer.writerow({key: _cell(value) for key, value in record.items()})


def write_trace(records: Iterable[dict], path: str) -> None:
    """Mean gap per grid point: experiment,t,gap_mean."""
    records = sorted(records, key=lambda r: (r["experiment"], r["t"]))
    with Path(path).open("w", encoding="utf-8", newline="") as f:
        writer = csv.DictWriter(f, fieldnames=["experiment", "t", "gap_mean"], lineterminator="\n")
        writer.writeheader()
        for record in records:
            writer.writerow({key: _cell(value) for key, value in record.items()})


def _cell(value):
    if isinstance(value, float):
        return repr(value)
    return value


def run_experiment(
    spec: ExperimentSpec,
    out: Optional[str] = None,
    fmt: str = "csv",
    threads: int = DEFAULT_THREADS,
    timing: bool = False,
    trace_out: Optional[str] = None,
) -> List[ResultRow]:
    """Execute one experiment and write its row (and trace) when paths are given."""
    result = execute(spec, threads, timing)
    if out:
        write_rows([result.row], out, fmt)
    if trace_out:
        write_trace(result.trace, trace_out)
    return [result.row]


# --- sweeps ---

def expand_sweep(
    base: ExperimentSpec,
    n_list: Optional[Sequence[int]] = None,
    delta_list: Optional[Sequence[float]] = None,
    N_list: Optional[Sequence[int]] = None,
) -> List[ExperimentSpec]:
    """One spec per point of the grid n_list x delta_list x N_list; ids encode the grid point."""
    specs = []
    for n, delta, N in product(n_list or [base.n], delta_list or [base.delta], N_list or [base.N]):
        parts = [base.experiment, f"n{n:05d}"]
        if delta_list:
            parts.append(f"d{delta:g}")
        if N_list:
            parts.append(f"N{N:09d}")
        specs.append(base.model_copy(update={"experiment": "-".join(parts), "n": n, "delta": delta, "N": N}))
    return specs


def run_sweep(
    specs: Sequence[ExperimentSpec],
    out: Optional[str] = None,
    fmt: str = "csv",
    threads: int = DEFAULT_THREADS,
    timing: bool = False,
    trace_out: Optional[str] = None,
) -> List[ResultRow]:
    results = [execute(spec, threads, timing) for spec in specs]
    rows = sorted((result.row for result in results), key=lambda row: row.experiment)
    if out:
        write_rows(rows, out, fmt)
    if trace_out:
        write_trace([record for result in results for record in result.trace], trace_out)
    return rows
