"""
Convergence trace recording.
Keeps the optimality gap of the averaged iterate on a logarithmic grid of
iteration counts, for plotting and for rate checks.
"""
from typing import Dict, List, Sequence, Tuple

import numpy as np


# Maximum number of grid points kept per run
MAX_TRACE_POINTS = 40


def log_grid(N: int, points: int = MAX_TRACE_POINTS) -> np.ndarray:
    """
    Iteration counts 1 <= t <= N spaced logarithmically.

    Args:
        N: number of iterations of the run
        points: upper bound on the grid size

    Returns:
        Sorted unique integer array that always ends with N
    """
    if N < 1:
        raise ValueError(f"N must be positive, got {N}")
    grid = np.unique(np.round(np.geomspace(1, N, num=min(points, N))).astype(np.int64))
    if grid[-1] != N:
        grid = np.append(grid, N)
    return grid


class GapTracker:
    """
    Records (t, gap) pairs at the grid points of one run.
    """

    def __init__(self, N: int, points: int = MAX_TRACE_POINTS):
        self.grid = log_grid(N, points)
        self._next = 0
        self.records: List[Tuple[int, float]] = []

    def due(self, t: int) -> bool:
        return self._next < self.grid.size and t == self.grid[self._next]

    def record(self, t: int, gap: float) -> None:
        """Add the gap at iteration t; t must be the next grid point."""
        if not self.due(t):
            raise ValueError(f"iteration {t} is not the next grid point")
        self.records.append((int(t), float(gap)))
        self._next += 1

    def as_list(self) -> List[Tuple[int, float]]:
        return list(self.records)

    @property
    def last_gap(self) -> float:
        if not self.records:
            return float("nan")
        return self.records[-1][1]


def mean_trace(traces: Sequence[Sequence[Tuple[int, float]]]) -> List[Dict[str, float]]:
    """
    Average several traces recorded on the same grid.

    Returns:
        List of {"t", "gap_mean"} records, one per grid point
    """
    if not traces:
        return []
    steps = [t for t, _ in traces[0]]
    for trace in traces[1:]:
        if [t for t, _ in trace] != steps:
            raise ValueError("traces were recorded on different grids")
    gaps = np.array([[gap for _, gap in trace] for trace in traces])
    return [{"t": t, "gap_mean": float(m)} for t, m in zip(steps, gaps.mean(axis=0))]
