from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from ..errors import NonIntegerRequired, NonPositive, OffGrid

INTEGER_TOL = 1e-9


@dataclass(frozen=True)
class Hurst:
    """Hurst parameter on the extended scale (0, inf) minus the integers."""

    value: float
    integer_part: int
    fractional_part: float

    @property
    def kernel_exponent(self) -> float:
        """Exponent H - 1/2 of the moving-average kernel."""
        return self.value - 0.5

    @property
    def fractional(self) -> "Hurst":
        return validate_hurst(self.fractional_part)


def validate_hurst(h) -> Hurst:
    if isinstance(h, Hurst):
        return h
    h = float(h)
    if not math.isfinite(h):
        raise ValueError(f"Hurst parameter must be finite, got {h}")
    if h <= 0:
        raise NonPositive(f"Hurst parameter must be positive, got {h}")
    if abs(h - round(h)) <= INTEGER_TOL:
        raise NonIntegerRequired(f"Hurst parameter must be non-integer, got {h}")
    k = math.floor(h)
    return Hurst(value=h, integer_part=k, fractional_part=h - k)


@dataclass(frozen=True)
class TimeGrid:
    n_steps: int
    start: float = 0.0
    end: float = 1.0

    def __post_init__(self):
        if int(self.n_steps) != self.n_steps or self.n_steps < 1:
            raise ValueError(f"n_steps must be a positive integer, got {self.n_steps}")
        if not self.end > self.start:
            raise ValueError(f"grid needs end > start, got [{self.start}, {self.end}]")

    @property
    def dt(self) -> float:
        return (self.end - self.start) / self.n_steps

    @property
    def points(self) -> np.ndarray:
        pts = self.start + self.dt * np.arange(self.n_steps + 1)
        pts[-1] = self.end
        return pts

    def __len__(self):
        return self.n_steps + 1

    def index_of(self, t: float) -> int:
        """Grid index of ``t``; raises OffGrid if ``t`` is not a grid point."""
        x = (float(t) - self.start) / self.dt
        i = int(round(x))
        if abs(x - i) > 1e-9 or not 0 <= i <= self.n_steps:
            raise OffGrid(f"time {t} is not on the grid {self}")
        return i

    def restrict(self, n_first: int) -> "TimeGrid":
        """Sub-grid made of the first ``n_first`` steps."""
        if not 1 <= n_first <= self.n_steps:
            raise ValueError(f"cannot restrict {self.n_steps}-step grid to {n_first} steps")
        return TimeGrid(n_first, self.start, self.start + n_first * self.dt)

    def coarsen(self, factor: int) -> "TimeGrid":
        if self.n_steps % factor:
            raise ValueError(f"{factor} does not divide {self.n_steps}")
        return TimeGrid(self.n_steps // factor, self.start, self.end)


@dataclass(frozen=True, eq=False)
class MultiLevelPath:
    """Base fBm and its iterated time integrals on a uniform grid.

    ``levels`` has shape ``(integer_part + 1, n_steps + 1, dim)``: ``levels[0]`` is
    the base process of Hurst index ``fractional_part``, ``levels[k]`` its k-fold
    iterated integral, and ``levels[-1]`` the process of Hurst index ``hurst``.
    """

    hurst: Hurst
    grid: TimeGrid
    levels: np.ndarray
    w_increments: Optional[np.ndarray] = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        lv = np.asarray(self.levels, dtype=float)
        if lv.ndim != 3:
            raise ValueError(f"levels must be 3-d (level, time, component), got shape {lv.shape}")
        if lv.shape[0] != self.hurst.integer_part + 1:
            raise ValueError(
                f"{lv.shape[0]} levels stored for H={self.hurst.value}, "
                f"expected {self.hurst.integer_part + 1}"
            )
        if lv.shape[1] != self.grid.n_steps + 1:
            raise ValueError("levels do not match the grid length")
        lv.setflags(write=False)
        object.__setattr__(self, "levels", lv)

    @property
    def dim(self) -> int:
        return self.levels.shape[2]

    @property
    def top(self) -> np.ndarray:
        """The process B^H itself, shape (n_steps + 1, dim)."""
        return self.levels[-1]

    @property
    def base(self) -> np.ndarray:
        return self.levels[0]

    def derivative(self, order: int) -> np.ndarray:
        """``order``-th time derivative of B^H, read off the stored levels."""
        if not 0 <= order <= self.hurst.integer_part:
            raise ValueError(f"derivative order {order} unavailable for H={self.hurst.value}")
        return self.levels[self.hurst.integer_part - order]

    def truncated(self, n_first: int) -> "MultiLevelPath":
        """Restriction to the first ``n_first`` steps of the grid."""
        return MultiLevelPath(self.hurst, self.grid.restrict(n_first), self.levels[:, : n_first + 1])


@dataclass(frozen=True, eq=False)
class MvnSimulation:
    """Truncated Mandelbrot-van Ness simulation keeping the driving increments.

    ``w_increments`` has shape ``(past_steps + n_steps, dim)``; row ``m`` is the
    increment of W over ``[full_grid.points[m], full_grid.points[m + 1]]``.
    """

    past_truncation: float
    past_steps: int
    full_grid: TimeGrid
    w_increments: np.ndarray
    path: MultiLevelPath

    @property
    def grid(self) -> TimeGrid:
        return self.path.grid

    @property
    def hurst(self) -> Hurst:
        return self.path.hurst
