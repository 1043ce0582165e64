"""
Validated records at the boundary of the library: experiment descriptions coming
from the command line or a config file, and the rows and reports written out.
"""
import math
from typing import List, Optional

from pydantic import BaseModel, Field, field_validator, model_validator

from .estimators import NAMED_ESTIMATORS
from .oracle import NoiseKind
from .problems import ProblemKind
from .solver import ScheduleKind

PYDANTIC_CONFIG = {
    "frozen": True,
    "extra": "forbid",
}

CSV_COLUMNS = (
    "experiment", "n", "scheme", "delta", "N", "gap_mean", "gap_se",
    "bound", "bound_ok", "oracle_calls", "seconds",
)


class ExperimentSpec(BaseModel):
    experiment: str = "run"
    problem: ProblemKind = ProblemKind.LINEAR_NOISY
    n: int = Field(10, ge=2)
    noise_radius: Optional[float] = Field(None, ge=0.0)
    estimator: str = "subgradient"
    mu: Optional[float] = Field(None, gt=0.0)  # None = tuned
    tau: Optional[float] = Field(None, gt=0.0)
    noise: NoiseKind = NoiseKind.NONE
    delta: Optional[float] = Field(None, ge=0.0)  # None = delta_max of the schedule
    bits: int = Field(0, ge=0)
    schedule: ScheduleKind = ScheduleKind.THEOREM1
    N: Optional[int] = Field(None, gt=0)  # None = tuned
    eps: Optional[float] = Field(None, gt=0.0)
    sigma: Optional[float] = Field(None, gt=0.0, lt=1.0)
    qbar: float = math.inf
    beta: Optional[float] = Field(None, gt=0.0)
    reps: int = Field(50, ge=2)
    seed: int = Field(0, ge=0, lt=2 ** 64)
    mu0: float = Field(1.0, gt=0.0)

    model_config = PYDANTIC_CONFIG

    @field_validator("estimator")
    @classmethod
    def known_estimator(cls, value: str) -> str:
        if value not in NAMED_ESTIMATORS:
            raise ValueError(f"unknown estimator {value!r}; choose from {', '.join(NAMED_ESTIMATORS)}")
        return value

    @field_validator("qbar")
    @classmethod
    def supported_qbar(cls, value: float) -> float:
        if value not in (2, math.inf):
            raise ValueError(f"qbar must be 2 or inf, got {value}")
        return value

    @model_validator(mode="after")
    def enough_to_size_the_run(self):
        if self.N is None and self.eps is None:
            raise ValueError("give either N or eps")
        if self.schedule in (ScheduleKind.THEOREM2, ScheduleKind.THEOREM3) and self.eps is None:
            raise ValueError(f"schedule {self.schedule.value} needs eps")
        if self.noise is NoiseKind.MANTISSA_TRUNCATE and self.bits < 1:
            raise ValueError("mantissa noise needs bits >= 1")
        return self


class ResultRow(BaseModel):
    experiment: str
    n: int
    scheme: str
    delta: float
    N: int
    gap_mean: float
    gap_se: float
    bound: float
    bound_ok: bool
    oracle_calls: int
    seconds: float = 0.0

    model_config = PYDANTIC_CONFIG


class CheckResult(BaseModel):
    suite: str
    name: str
    n: Optional[int] = None
    measured: float
    target: float
    tolerance: float = 0.0
    std_error: float = 0.0
    passed: bool
    detail: Optional[str] = None

    model_config = PYDANTIC_CONFIG


class VerificationReport(BaseModel):
    suites: List[str]
    seed: int
    checks: List[CheckResult]

    model_config = PYDANTIC_CONFIG

    @property
    def passed(self) -> bool:
        return all(check.passed for check in self.checks)

    @property
    def failures(self) -> List[CheckResult]:
        return [check for check in self.checks if not check.passed]
