"""Log-log least squares, the estimator behind every exponent check."""

from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np
from scipy import stats

from .errors import DegenerateInput


@dataclass(frozen=True)
class RateEstimate:
    slope: float
    intercept: float
    stderr: float
    n_points: int
    r_squared: float

    def as_dict(self) -> dict:
        return asdict(self)


def loglog_fit(xs, ys) -> RateEstimate:
    """Fit ``log y = intercept + slope * log x`` by ordinary least squares."""
    x = np.asarray(xs, dtype=float).ravel()
    y = np.asarray(ys, dtype=float).ravel()
    if x.size != y.size:
        raise DegenerateInput(f"length mismatch: {x.size} vs {y.size}")
    if x.size < 3:
        raise DegenerateInput(f"need at least 3 points, got {x.size}")
    if not (np.all(np.isfinite(x)) and np.all(np.isfinite(y))):
        raise DegenerateInput("non-finite input")
    if np.any(x <= 0) or np.any(y <= 0):
        raise DegenerateInput("log-log fit needs strictly positive data")
    lx, ly = np.log(x), np.log(y)
    if np.ptp(lx) == 0:
        raise DegenerateInput("all abscissae coincide")
    res = stats.linregress(lx, ly)
    r2 = float(res.rvalue**2) if np.isfinite(res.rvalue) else 1.0
    return RateEstimate(float(res.slope), float(res.intercept), float(res.stderr), int(x.size), r2)
