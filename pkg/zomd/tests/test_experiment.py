"""
Unit tests for experiment planning, replication and result files.
"""
import json
import math

import pytest


def _spec(**overrides):
    from zomd.schemas import ExperimentSpec

    values = dict(
        experiment="t", problem="linear", n=4, estimator="p2", mu=0.1,
        noise="uniform", delta=0.01, schedule="thm1", N=200, reps=2, seed=3,
    )
    values.update(overrides)
    return ExperimentSpec(**values)


class TestExperimentSpec:
    """Validation of experiment descriptions."""

    @pytest.mark.parametrize("overrides", [
        {"estimator": "bogus"},
        {"reps": 1},
        {"n": 1},
        {"qbar": 3.0},
        {"schedule": "thm2", "eps": None},
        {"noise": "mantissa", "bits": 0},
        {"N": None, "eps": None},
        {"colour": "red"},
    ])
    def test_invalid_specs(self, overrides):
        from pydantic import ValidationError

        with pytest.raises(ValidationError):
            _spec(**overrides)

    def test_frozen(self):
        from pydantic import ValidationError

        with pytest.raises(ValidationError):
            _spec().n = 8


class TestResolvePlan:
    """Tuned parameters filled in from the schedule."""

    def test_theorem2_defaults(self):
        """mu = eps / 2M and delta = delta_max when both are left to the tuning."""
        from zomd.experiment import resolve_plan

        plan = resolve_plan(_spec(schedule="thm2", eps=0.5, mu=None, delta=None, N=20))
        assert plan.config.mu == pytest.approx(0.5 / (2 * plan.problem.M))
        assert plan.channel.delta == pytest.approx(plan.delta_max)
        assert plan.N == 20
        assert plan.bound == 0.5

    def test_tau_follows_mu(self):
        from zomd.experiment import resolve_plan

        plan = resolve_plan(_spec(estimator="rademacher", mu=0.05))
        assert plan.config.tau == pytest.approx(0.05)

    def test_manual_schedule(self):
        """The manual schedule defaults its constant to M and has no bound."""
        from zomd.experiment import resolve_plan

        plan = resolve_plan(_spec(schedule="manual"))
        assert plan.bound == math.inf
        assert plan.schedule.constant == pytest.approx(plan.problem.M)

    def test_manual_needs_n(self):
        from zomd.errors import TuningError
        from zomd.experiment import resolve_plan

        with pytest.raises(TuningError):
            resolve_plan(_spec(schedule="manual", N=None, eps=0.1))

    def test_noise_needs_delta_without_budget(self):
        """theorem-1 runs have no delta_max to fall back on."""
        from zomd.errors import TuningError
        from zomd.experiment import resolve_plan

        with pytest.raises(TuningError):
            resolve_plan(_spec(delta=None))

    def test_same_problem_for_every_replication(self):
        from zomd.experiment import resolve_plan

        a, b = resolve_plan(_spec()), resolve_plan(_spec(reps=5))
        assert list(a.problem.c) == list(b.problem.c)


class TestStepCap:
    """Automatic mu and tau keep every query within mu0 of the simplex."""

    @pytest.mark.parametrize("overrides", [
        {"estimator": "p2", "schedule": "thm1", "eps": 0.3},
        {"estimator": "rademacher", "schedule": "thm1", "eps": 0.3},
        {"estimator": "p2", "schedule": "thm3", "eps": 0.3},
        {"estimator": "pinf", "schedule": "thm2", "eps": 0.3, "problem": "distl1", "n": 20},
    ])
    def test_tuned_step_runs(self, overrides):
        from zomd.experiment import execute, resolve_plan

        spec = _spec(mu=None, noise="none", delta=None, N=30, **overrides)
        plan = resolve_plan(spec)
        step = plan.config.mu if plan.config.mu is not None else plan.config.tau
        assert step * plan.config.step_extent(plan.problem.n) <= plan.problem.mu0 + 1e-12
        result = execute(spec, threads=1)
        assert math.isfinite(result.row.gap_mean)

    def test_noise_budget_shrinks_with_mu(self):
        """delta_max stays M mu / 2 after the cap (mu0 / n = 0.05 against a tuned 0.136)."""
        from zomd.experiment import resolve_plan

        plan = resolve_plan(_spec(
            estimator="pinf", schedule="thm2", eps=0.3, problem="distl1", n=20, mu=None, delta=None, N=30,
        ))
        assert plan.config.mu == pytest.approx(0.05)
        assert plan.delta_max == pytest.approx(plan.problem.M * plan.config.mu / 2)
        assert plan.channel.delta == pytest.approx(plan.delta_max)

    def test_theorem3_budget_after_cap(self):
        from zomd.experiment import resolve_plan

        plan = resolve_plan(_spec(schedule="thm3", eps=0.3, mu=None, delta=None, N=30))
        assert plan.config.mu == pytest.approx(0.5)
        assert plan.delta_max == pytest.approx(plan.problem.M2 * 0.5 / math.sqrt(96 * 4))

    def test_explicit_mu_rejected_before_running(self):
        """An explicit mu is never capped; it fails while resolving the plan."""
        from zomd.errors import DomainError
        from zomd.experiment import resolve_plan

        with pytest.raises(DomainError):
            resolve_plan(_spec(mu=0.9))


class TestExecute:
    """Replicated runs and their summary row."""

    def test_row_fields(self):
        from zomd.experiment import execute

        result = execute(_spec(), threads=1)
        row = result.row
        assert row.oracle_calls == 400
        assert row.seconds == 0.0
        assert row.bound_ok == (row.gap_mean <= row.bound)
        assert len(result.reports) == 2
        assert result.reports[0].final_gap != result.reports[1].final_gap

    def test_threads_do_not_change_results(self):
        from zomd.experiment import execute

        serial = execute(_spec(reps=3), threads=1).row
        pooled = execute(_spec(reps=3), threads=2).row
        assert serial == pooled


class TestOutput:
    """Result files."""

    def test_csv_byte_identical(self, tmp_path):
        """Two invocations with the same seed write the same bytes."""
        from zomd.experiment import run_experiment

        first, second = tmp_path / "a.csv", tmp_path / "b.csv"
        run_experiment(_spec(), out=str(first), threads=1)
        run_experiment(_spec(), out=str(second), threads=1)
        assert first.read_bytes() == second.read_bytes()

    def test_csv_layout(self, tmp_path):
        from zomd.experiment import run_experiment
        from zomd.schemas import CSV_COLUMNS

        out = tmp_path / "rows.csv"
        run_experiment(_spec(), out=str(out), threads=1)
        header, line = out.read_text(encoding="utf-8").splitlines()
        assert header == ",".join(CSV_COLUMNS)
        assert b"\r" not in out.read_bytes()
        cells = dict(zip(CSV_COLUMNS, line.split(",")))
        assert cells["scheme"] == "p2"
        assert cells["bound_ok"] in ("true", "false")
        assert cells["seconds"] == "0.0"

    def test_jsonl(self, tmp_path):
        from zomd.experiment import run_experiment
        from zomd.schemas import CSV_COLUMNS

        out = tmp_path / "rows.jsonl"
        run_experiment(_spec(), out=str(out), fmt="jsonl", threads=1)
        record = json.loads(out.read_text(encoding="utf-8").strip())
        assert tuple(record) == CSV_COLUMNS
        assert record["bound_ok"] in (True, False)

    def test_trace_file(self, tmp_path):
        from zomd.experiment import run_experiment

        out = tmp_path / "trace.csv"
        run_experiment(_spec(N=50), threads=1, trace_out=str(out))
        lines = out.read_text(encoding="utf-8").splitlines()
        assert lines[0] == "experiment,t,gap_mean"
        assert lines[-1].startswith("t,50,")

    def test_unknown_format(self, tmp_path):
        from zomd.experiment import write_rows

        with pytest.raises(ValueError):
            write_rows([], str(tmp_path / "x"), fmt="xml")


class TestSweep:
    """Grid expansion."""

    def test_ids_encode_grid_point(self):
        from zomd.experiment import expand_sweep

        specs = expand_sweep(_spec(experiment="s"), n_list=[8, 16], delta_list=[0.1, 0.02])
        assert [s.experiment for s in specs] == [
            "s-n00008-d0.1", "s-n00008-d0.02", "s-n00016-d0.1", "s-n00016-d0.02",
        ]
        assert [s.n for s in specs] == [8, 8, 16, 16]
        assert all(s.N == 200 for s in specs)

    def test_rows_sorted(self, tmp_path):
        from zomd.experiment import expand_sweep, run_sweep

        specs = expand_sweep(_spec(experiment="s", N=20), N_list=[20, 10])
        rows = run_sweep(specs, out=str(tmp_path / "sweep.csv"), threads=1)
        assert [row.experiment for row in rows] == ["s-n00004-N000000010", "s-n00004-N000000020"]
        assert [row.N for row in rows] == [10, 20]
