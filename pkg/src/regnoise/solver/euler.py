"""Explicit Euler scheme for the equation written as a degenerate first-order system."""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from ..noise.types import MultiLevelPath, TimeGrid
from .drift import DriftSpec


@dataclass(frozen=True, eq=False)
class SolutionPath:
    """``x`` has shape (n+1, d); ``u`` stacks U^1..U^k with shape (k, n+1, d)."""

    grid: TimeGrid
    x: np.ndarray
    u: np.ndarray

    def write_csv(self, path) -> Path:
        path = Path(path)
        k = self.u.shape[0]
        t = self.grid.points
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["t", "component", "x"] + [f"u{i + 1}" for i in range(k)])
            for j in range(t.size):
                for c in range(self.x.shape[1]):
                    w.writerow([repr(float(t[j])), c, repr(float(self.x[j, c]))]
                               + [repr(float(self.u[i, j, c])) for i in range(k)])
        return path


def euler_system_solve(path: MultiLevelPath, drift: DriftSpec) -> SolutionPath:
    """Left-point Euler on ``U^1 = B^{H-floor H}``, ``dU^{i+1} = U^i dt``,
    ``dX = (b(X) + U^{floor H}) dt``.

    For H < 1 there is no chain and X is advanced with the noise increment.
    The drift is not stopped.
    """
    dt = path.grid.dt
    base = path.base
    n1, d = base.shape
    k = path.hurst.integer_part
    u = np.empty((max(k, 1), n1, d))
    u[0] = base
    for i in range(1, k):
        u[i, 0] = 0.0
        u[i, 1:] = dt * np.cumsum(u[i - 1, :-1], axis=0)
    x = np.zeros((n1, d))
    if k == 0:
        noise_step = np.diff(base, axis=0)
    else:
        noise_step = dt * u[k - 1, :-1]
    for j in range(n1 - 1):
        x[j + 1] = x[j] + dt * drift(x[j]) + noise_step[j]
    return SolutionPath(path.grid, x, u)
