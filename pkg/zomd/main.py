"""
Command-line entry point: zomd run | sweep | verify.

Defaults come from the environment (see config.py), then from an optional
key=value file given with --config, then from the flags themselves.
"""
import argparse
import logging
import math
import sys
from pathlib import Path
from typing import List, Optional, Sequence

from pydantic import ValidationError

from . import config
from .errors import ZomdError
from .estimators import NAMED_ESTIMATORS
from .experiment import expand_sweep, run_experiment, run_sweep
from .oracle import NoiseKind
from .problems import ProblemKind
from .schemas import ExperimentSpec
from .solver import ScheduleKind
from .verification import Suite, verify_suite

logger = logging.getLogger(__name__)

# Flags that are not part of ExperimentSpec
CLI_ONLY = {"command", "config", "out", "format", "threads", "timing", "trace_out", "log_level",
            "n_list", "N_list", "delta_list", "suite", "mc"}

# Flags without a value; config files spell them true/false
BOOLEAN_FLAGS = {"timing"}
_BOOLEANS = {"true": True, "yes": True, "on": True, "1": True, "false": False, "no": False, "off": False, "0": False}


def _auto_float(value: str) -> Optional[float]:
    return None if value == "auto" else float(value)


def _auto_int(value: str) -> Optional[int]:
    return None if value == "auto" else int(value)


def _qbar(value: str) -> float:
    return math.inf if value in ("inf", "Inf", "infinity") else float(value)


def _int_list(value: str) -> List[int]:
    return [int(item) for item in value.split(",") if item.strip()]


def _float_list(value: str) -> List[float]:
    return [float(item) for item in value.split(",") if item.strip()]


def _add_common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", help="key=value file with flag defaults")
    parser.add_argument("--seed", type=int, default=config.DEFAULT_SEED)
    parser.add_argument("--threads", type=int, default=config.DEFAULT_THREADS)
    parser.add_argument("--log-level", default=config.LOG_LEVEL)


def _add_experiment(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--experiment", default="run", help="experiment id written to the output")
    parser.add_argument("--problem", choices=[k.value for k in ProblemKind], default=ProblemKind.LINEAR_NOISY.value)
    parser.add_argument("--n", type=int, default=10)
    parser.add_argument("--noise-radius", type=float, default=None)
    parser.add_argument("--estimator", choices=list(NAMED_ESTIMATORS), default="subgradient")
    parser.add_argument("--mu", type=_auto_float, default=None, help="smoothing radius or auto")
    parser.add_argument("--tau", type=float, default=None)
    parser.add_argument("--noise", choices=[k.value for k in NoiseKind], default=NoiseKind.NONE.value)
    parser.add_argument("--delta", type=_auto_float, default=None, help="noise level or auto (delta_max)")
    parser.add_argument("--bits", type=int, default=0)
    parser.add_argument("--schedule", choices=[k.value for k in ScheduleKind], default=ScheduleKind.THEOREM1.value)
    parser.add_argument("--N", type=_auto_int, default=None, help="iterations or auto")
    parser.add_argument("--eps", type=float, default=None)
    parser.add_argument("--sigma", type=float, default=None, help="failure probability for high-probability N")
    parser.add_argument("--qbar", type=_qbar, default=math.inf)
    parser.add_argument("--beta", type=float, default=None, help="constant c of the manual schedule c*sqrt(t)")
    parser.add_argument("--reps", type=int, default=config.DEFAULT_REPS)
    parser.add_argument("--mu0", type=float, default=config.MU0)
    parser.add_argument("--out", default=config.DEFAULT_OUT)
    parser.add_argument("--format", choices=["csv", "jsonl"], default="csv")
    parser.add_argument("--timing", action="store_true", help="write wall seconds instead of 0")
    parser.add_argument("--trace-out", default=None, help="CSV of mean gap on the log grid")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="zomd", description="Zeroth-order mirror descent on the simplex")
    commands = parser.add_subparsers(dest="command", required=True)

    run_parser = commands.add_parser("run", help="replicated runs of one configuration")
    _add_common(run_parser)
    _add_experiment(run_parser)

    sweep_parser = commands.add_parser("sweep", help="grid of runs over n, delta and N")
    _add_common(sweep_parser)
    _add_experiment(sweep_parser)
    sweep_parser.add_argument("--n-list", type=_int_list, default=None)
    sweep_parser.add_argument("--delta-list", type=_float_list, default=None)
    sweep_parser.add_argument("--N-list", type=_int_list, default=None)

    verify_parser = commands.add_parser("verify", help="Monte-Carlo verification suites")
    _add_common(verify_parser)
    verify_parser.add_argument("--suite", action="append", choices=[s.value for s in Suite], default=None)
    verify_parser.add_argument("--n-list", type=_int_list, default=None)
    verify_parser.add_argument("--mc", type=int, default=config.MC_SAMPLES)
    verify_parser.add_argument("--out", default=None, help="JSON report path")

    parser.command_parsers = {"run": run_parser, "sweep": sweep_parser, "verify": verify_parser}
    return parser


def _file_flags(parser: argparse.ArgumentParser, subparser: argparse.ArgumentParser, path: str,
                file_values: dict) -> dict:
    """Check config-file keys against the subcommand and convert on/off flags to booleans."""
    known = set(vars(subparser.parse_args([])))
    unknown = sorted(set(file_values) - known)
    if unknown:
        parser.error(f"unknown keys in {path}: {', '.join(unknown)}")
    values = dict(file_values)
    # store_true flags take no value on the command line, so argparse never converts them
    for key in BOOLEAN_FLAGS & set(values):
        flag = _BOOLEANS.get(str(values[key]).strip().lower())
        if flag is None:
            parser.error(f"{key}={values[key]!r} in {path} is not a boolean; use true or false")
        values[key] = flag
    return values


def parse_args(argv: Optional[Sequence[str]] = None) -> argparse.Namespace:
    """Parse flags, with values from --config filling in flags not given."""
    parser = build_parser()
    argv = list(sys.argv[1:] if argv is None else argv)
    pre, _ = parser.parse_known_args(argv)
    try:
        file_values = config.load_config_file(getattr(pre, "config", None))
    except FileNotFoundError as e:
        parser.error(str(e))
    if file_values:
        subparser = parser.command_parsers[pre.command]
        subparser.set_defaults(**_file_flags(parser, subparser, pre.config, file_values))
    return parser.parse_args(argv)


def spec_from_args(args: argparse.Namespace) -> ExperimentSpec:
    values = {key: value for key, value in vars(args).items() if key not in CLI_ONLY}
    return ExperimentSpec(**values)


def _print_report(report) -> None:
    for check in report.checks:
        status = "PASS" if check.passed else "FAIL"
        n = "" if check.n is None else f" n={check.n}"
        print(f"{status} {check.suite}/{check.name}{n}: measured={check.measured:.6g} "
              f"target={check.target:.6g} tol={check.tolerance:.3g}")


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = parse_args(argv)
    logging.basicConfig(level=args.log_level.upper(), format="%(asctime)s %(levelname)s %(name)s: %(message)s")

    try:
        if args.command == "verify":
            report = verify_suite(
                args.suite or [s.value for s in Suite],
                n_list=args.n_list,
                seed=args.seed,
                mc=args.mc,
                threads=args.threads,
            )
            _print_report(report)
            if args.out:
                Path(args.out).write_text(report.model_dump_json(indent=2) + "\n", encoding="utf-8")
            return 0 if report.passed else 1

        spec = spec_from_args(args)
        if args.command == "sweep":
            specs = expand_sweep(spec, args.n_list, args.delta_list, args.N_list)
            rows = run_sweep(specs, args.out, args.format, args.threads, args.timing, args.trace_out)
        else:
            rows = run_experiment(spec, args.out, args.format, args.threads, args.timing, args.trace_out)
        for row in rows:
            logger.info(
                f"{row.experiment}: gap {row.gap_mean:.4g} +/- {row.gap_se:.2g}, bound {row.bound:.4g}, "
                f"ok={row.bound_ok}"
            )
        return 0
    except ValidationError as e:
        logger.error(f"invalid experiment: {e}")
        return 2
    except ZomdError as e:
        logger.error(str(e))
        return 2
    except OSError as e:
        logger.error(f"I/O error on {e.filename}: {e.strerror}")
        return 2


if __name__ == "__main__":
    sys.exit(main())
