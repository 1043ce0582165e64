"""
Scaling-rate fits with scikit-learn.
Fits log(value) = slope * log(n) + b to measured moments or gaps and checks the
slope against a predicted exponent.
"""
import logging
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
from sklearn.linear_model import LinearRegression

logger = logging.getLogger(__name__)

# Minimum number of (n, value) pairs for a slope fit
MIN_DATA_POINTS = 2

# Allowed distance between a fitted and a predicted exponent
SLOPE_TOLERANCE = 0.35


@dataclass(frozen=True)
class SlopeFit:
    slope: float
    intercept: float
    r2: float
    points: int

    def within(self, target: float, tolerance: float = SLOPE_TOLERANCE) -> bool:
        return abs(self.slope - target) <= tolerance


def fit_loglog_slope(xs: Sequence[float], values: Sequence[float]) -> Optional[SlopeFit]:
    """
    Least-squares slope of log(values) against log(xs).

    Args:
        xs: positive abscissae, e.g. dimensions or iteration counts
        values: positive measurements

    Returns:
        SlopeFit, or None with fewer than MIN_DATA_POINTS usable pairs
    """
    xs = np.asarray(xs, dtype=float)
    values = np.asarray(values, dtype=float)
    if xs.shape != values.shape:
        raise ValueError(f"xs and values differ in shape: {xs.shape} vs {values.shape}")

    usable = (xs > 0) & (values > 0) & np.isfinite(values)
    if usable.sum() < MIN_DATA_POINTS:
        return None

    X = np.log(xs[usable]).reshape(-1, 1)
    y = np.log(values[usable])
    model = LinearRegression()
    model.fit(X, y)
    r2 = model.score(X, y) if usable.sum() > 2 else 1.0
    fit = SlopeFit(float(model.coef_[0]), float(model.intercept_), float(r2), int(usable.sum()))
    logger.debug(f"log-log fit over {fit.points} points: slope={fit.slope:.3f}, r2={fit.r2:.3f}")
    return fit


def rate_ratio(gap_short: float, gap_long: float) -> float:
    """Gap at N divided by gap at a longer run; sqrt(k) is expected for a k-fold longer run."""
    if gap_long <= 0:
        return float("inf")
    return gap_short / gap_long
