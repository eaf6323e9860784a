"""Grid estimators of Hölder (semi-)norms and the stopping times built on them."""

from __future__ import annotations

import math

import numpy as np

from ..errors import InsufficientGrid
from .types import MultiLevelPath

ALL_PAIRS_LIMIT = 2000


def split_exponent(gamma: float) -> tuple[int, float]:
    """``gamma = whole + frac`` with whole an integer and frac in (0, 1]."""
    if gamma <= 0:
        raise ValueError(f"Hölder exponent must be positive, got {gamma}")
    whole = math.ceil(gamma) - 1
    return whole, gamma - whole


def pair_lags(n_points: int) -> tuple[np.ndarray, str]:
    """Lags used for grid suprema: all of them on small grids, dyadic ones above."""
    if n_points < ALL_PAIRS_LIMIT:
        return np.arange(1, n_points), "all"
    lags = 2 ** np.arange(int(math.log2(n_points - 1)) + 1)
    return lags, "dyadic"


def _norm(x: np.ndarray) -> np.ndarray:
    return np.abs(x) if x.ndim == 1 else np.linalg.norm(x, axis=-1)


def _seminorm_of(g: np.ndarray, frac: float, dt: float) -> tuple[float, dict]:
    lags, rule = pair_lags(g.shape[0])
    best = 0.0
    for lag in lags:
        d = _norm(g[lag:] - g[:-lag])
        best = max(best, float(d.max()) / (lag * dt) ** frac)
    return best, {"pairs": rule, "n_lags": int(len(lags))}


def finite_difference(f: np.ndarray, order: int, dt: float) -> np.ndarray:
    """``order``-fold central differences (second-order one-sided at the ends)."""
    g = np.asarray(f, dtype=float)
    for _ in range(order):
        g = np.gradient(g, dt, axis=0, edge_order=2 if g.shape[0] >= 3 else 1)
    return g


def holder_seminorm_info(path, gamma: float, dt: float | None = None,
                         derivative_source: str = "finite_difference") -> tuple[float, dict]:
    """Grid value of ``[f]_{C^gamma}`` together with the pair-set metadata.

    ``path`` is either a sampled function (array of shape (n,) or (n, d), with
    ``dt`` given) or a :class:`MultiLevelPath`, in which case the derivative is a
    stored level and ``derivative_source`` must be ``"exact_levels"``.
    """
    whole, frac = split_exponent(gamma)
    if isinstance(path, MultiLevelPath):
        if derivative_source != "exact_levels":
            raise ValueError("MultiLevelPath input uses derivative_source='exact_levels'")
        g = path.derivative(whole)
        dt = path.grid.dt
    else:
        if derivative_source != "finite_difference":
            raise ValueError("exact_levels needs a MultiLevelPath")
        if dt is None:
            raise ValueError("dt is required for sampled input")
        f = np.asarray(path, dtype=float)
        if f.shape[0] < whole + 2:
            raise InsufficientGrid(f"{f.shape[0]} points cannot resolve a C^{gamma} seminorm")
        g = finite_difference(f, whole, dt)
    if g.shape[0] < 2:
        raise InsufficientGrid("need at least two grid points")
    value, meta = _seminorm_of(g, frac, dt)
    meta.update(derivative_order=whole, exponent=frac, derivative_source=derivative_source)
    return value, meta


def holder_seminorm(path, gamma: float, dt: float | None = None,
                    derivative_source: str = "finite_difference") -> float:
    return holder_seminorm_info(path, gamma, dt, derivative_source)[0]


def running_holder_norm(sup_values: np.ndarray, deriv: np.ndarray, frac: float, dt: float) -> np.ndarray:
    """``||f||_{C^0[0,t_j]} + [f]_{C^gamma[0,t_j]}`` for every grid index j."""
    n = deriv.shape[0]
    sup = np.maximum.accumulate(_norm(np.asarray(sup_values, dtype=float)))
    ending = np.zeros(n)
    lags, _ = pair_lags(n)
    for lag in lags:
        d = _norm(deriv[lag:] - deriv[:-lag]) / (lag * dt) ** frac
        np.maximum(ending[lag:], d, out=ending[lag:])
    return sup + np.maximum.accumulate(ending)


def holder_norm_path(path: MultiLevelPath, eps: float) -> np.ndarray:
    """Running ``(H - eps)``-Hölder norm of B^H, derivatives from the stored levels."""
    h = path.hurst.value
    if not 0 < eps < h:
        raise ValueError(f"need 0 < eps < H, got eps={eps}, H={h}")
    whole, frac = split_exponent(h - eps)
    return running_holder_norm(path.top, path.derivative(whole), frac, path.grid.dt)


def stopping_index(path: MultiLevelPath, K: float, eps: float) -> int:
    """Index of the first grid point where the running norm exceeds K (last index if never)."""
    norm = holder_norm_path(path, eps)
    hit = np.flatnonzero(norm > K)
    return int(hit[0]) if hit.size else path.grid.n_steps


def stopping_time_tau_K(path: MultiLevelPath, K: float, eps: float) -> float:
    """Grid version of ``inf{t : ||B^H||_{C^{H-eps}[0,t]} > K} ∧ end``."""
    return float(path.grid.points[stopping_index(path, K, eps)])
