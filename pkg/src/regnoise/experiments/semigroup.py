"""Gaussian semigroup P^H_t, the conditional semigroup identity and the heat kernel bounds."""

from __future__ import annotations

import itertools
import math
import time
from typing import Callable

import numpy as np

from ..fit import loglog_fit
from ..noise.conditional import c_of_H, conditional_mean_levels, conditional_remainder_path
from ..noise.generate import gen_mvn_fbm, iterated_integrals
from ..noise.types import TimeGrid, validate_hurst
from ..rng import experiment_seed, parallel_map
from ..solver.drift import DriftSpec, builtin_drift, unit_holder
from .report import ExperimentReport

MAX_TENSOR_POINTS = 2**21


def _hermite_grid(nodes: int, dim: int) -> tuple[np.ndarray, np.ndarray]:
    z, w = np.polynomial.hermite.hermgauss(nodes)
    pts = np.array(list(itertools.product(z, repeat=dim)))
    wts = np.prod(np.array(list(itertools.product(w, repeat=dim))), axis=1) / math.pi ** (dim / 2)
    return pts, wts


def gaussian_semigroup_apply(f: Callable, h, t: float, x, quadrature_nodes: int = 32):
    """``P^H_t f(x) = E f(x + N(0, c(H) t^{2H} I))`` by tensor Gauss-Hermite quadrature.

    ``f`` maps an array of shape ``(..., d)`` to ``(...)``. ``x`` is a single
    point ``(d,)`` (returns a float) or a batch ``(m, d)`` (returns ``(m,)``).
    """
    hurst = validate_hurst(h)
    if quadrature_nodes < 16:
        raise ValueError("quadrature_nodes must be at least 16")
    if t < 0:
        raise ValueError(f"t must be non-negative, got {t}")
    x = np.asarray(x, dtype=float)
    single = x.ndim == 1
    xb = x[None] if single else x
    d = xb.shape[1]
    if quadrature_nodes**d > MAX_TENSOR_POINTS:
        raise ValueError(f"{quadrature_nodes}^{d} tensor nodes is too many")
    var = c_of_H(hurst) * t ** (2 * hurst.value)
    if var == 0.0:
        out = np.asarray(f(xb), dtype=float)
    else:
        pts, wts = _hermite_grid(quadrature_nodes, d)
        vals = np.asarray(f(xb[:, None, :] + math.sqrt(2 * var) * pts[None]), dtype=float)
        out = vals @ wts
    return float(out[0]) if single else out


def component(drift: DriftSpec, index: int = 0) -> Callable:
    """Scalar test function ``y -> drift(y)[index]``."""
    def f(y):
        y = np.asarray(y, dtype=float)
        return np.asarray(drift(y.reshape(-1, y.shape[-1])))[:, index].reshape(y.shape[:-1])
    return f


def _default_f(alpha: float, dim: int) -> Callable:
    return component(builtin_drift("abs_pow", alpha, dim))


def _semigroup_outer(h, f, s, t, n_inner, grid_n, past_truncation, dim, quad_nodes, rs):
    hurst = validate_hurst(h)
    grid = TimeGrid(grid_n)
    sim = gen_mvn_fbm(hurst, grid, dim, past_truncation, rs.child(0))
    i_s, i_t = grid.index_of(s), grid.index_of(t)
    m = i_t - i_s
    mean_levels = conditional_mean_levels(sim, s)
    mean_t = mean_levels[-1, m]
    rhs = gaussian_semigroup_apply(f, hurst, t - s, mean_t, quad_nodes)

    half = n_inner // 2
    rng = rs.child(1).generator()
    dw = rng.standard_normal((half, m, dim)) * math.sqrt(grid.dt)
    dw = np.concatenate([dw, -dw])
    # future part of the base on [s, t]: moving average over the fresh cells only
    fluct = conditional_remainder_path(dw, hurst.fractional, grid.dt)
    fluct = np.moveaxis(fluct, 0, 1)
    top = iterated_integrals(fluct, hurst.integer_part, grid.dt)[-1, m]
    vals = np.asarray(f(mean_t + top), dtype=float)
    pair_means = 0.5 * (vals[:half] + vals[half:])
    lhs = float(pair_means.mean())
    se = float(pair_means.std(ddof=1) / math.sqrt(half)) if half > 1 else 0.0
    return lhs, rhs, se


def semigroup_identity_experiment(h, f: Callable | None = None, s: float = 0.5, t: float = 0.75,
                                  n_samples: int = 64, seed: int = 0, n_outer: int = 50,
                                  alpha: float = 0.8, dim: int = 1, grid_n: int = 1000,
                                  past_truncation: float = 50.0, quadrature_nodes: int = 32,
                                  n_se: float = 3.0, workers: int | None = None) -> ExperimentReport:
    """Nested Monte Carlo check of ``E^s f(B_t) = P^H_{t-s} f(E^s B_t)``.

    Outer paths come from the moving-average generator. For each, the future
    on ``(s, t]`` is resampled ``n_samples`` times (antithetic pairs), run
    through the discretised moving average and re-lifted from ``s``; the right
    side is the quadrature at the simulated conditional mean. ``f`` defaults
    to the first component of the ``abs_pow`` drift.
    """
    t0 = time.perf_counter()
    hurst = validate_hurst(h)
    if not 0 <= s < t <= 1:
        raise ValueError(f"need 0 <= s < t <= 1, got s={s}, t={t}")
    if n_samples < 4 or n_samples % 2:
        raise ValueError("n_samples must be an even number >= 4 (antithetic pairs)")
    grid = TimeGrid(grid_n)
    grid.index_of(s), grid.index_of(t)
    f_name = "abs_pow" if f is None else getattr(f, "__name__", "custom")
    if f is None:
        f = _default_f(alpha, dim)

    def run(o):
        return _semigroup_outer(hurst, f, s, t, n_samples, grid_n, past_truncation, dim, quadrature_nodes,
                                experiment_seed(seed, f"semigroup_identity:{hurst.value!r}:{s!r}:{t!r}", o))

    res = np.array(parallel_map(run, range(n_outer), workers))
    lhs, rhs, se = res.T
    resid = lhs - rhs
    mean_resid = float(resid.mean())
    agg_se = float(math.sqrt(np.sum(se**2)) / n_outer)
    z = mean_resid / agg_se if agg_se > 0 else 0.0
    passed = abs(mean_resid) <= n_se * agg_se if agg_se > 0 else abs(mean_resid) <= 1e-12
    metrics = {"mean_residual": mean_resid, "std_error": agg_se, "z_score": z,
               "max_abs_residual": float(np.abs(resid).max()), "mean_lhs": float(lhs.mean())}
    config = {"h": hurst.value, "f": f_name, "alpha": alpha, "s": s, "t": t, "n_samples": n_samples,
              "n_outer": n_outer, "dim": dim, "grid_n": grid_n, "past_truncation": past_truncation,
              "quadrature_nodes": quadrature_nodes, "n_se": n_se}
    table = [{"outer": o, "lhs": float(a), "rhs": float(b), "std_error": float(c)}
             for o, (a, b, c) in enumerate(res)]
    return ExperimentReport("semigroup_identity", config, metrics, bool(passed), seed,
                            time.perf_counter() - t0, table, ("outer", "lhs", "rhs", "std_error"))


DEFAULT_T_VALUES = tuple(2.0**-k for k in range(1, 9))


def heat_kernel_probe(h, alpha: float, n_trials: int = 1000, seed: int = 0, t_values=DEFAULT_T_VALUES,
                      f: Callable | None = None, quadrature_nodes: int = 48,
                      growth_tol: float = 0.25) -> ExperimentReport:
    """Empirical envelope of the two heat kernel estimates for a unit C^alpha function.

    First bound: ``|P_t f(x) - P_t f(y)| <= N t^{H(alpha-1)} |x - y|``.
    Second bound: ``|P_t f(x1) - P_t f(x2) - P_t f(x3) + P_t f(x4)|
    <= N (t^{H(alpha-1)} |x1 - x2 - x3 + x4| + t^{H(alpha-2)} |x1 - x2||x1 - x3|)``.
    Points are drawn on the natural scale ``t^H`` with common random numbers
    across ``t``; the report records the largest ratio LHS/RHS per ``t``.
    Stability means the per-``t`` maxima do not grow as ``t`` decreases
    (log-log slope against t at least ``-growth_tol``).
    """
    t0 = time.perf_counter()
    hurst = validate_hurst(h)
    H = hurst.value
    if not 0 < alpha <= 1:
        raise ValueError(f"alpha must lie in (0, 1], got {alpha}")
    t_values = [float(x) for x in t_values]
    f_name = "abs_pow" if f is None else getattr(f, "__name__", "custom")
    if f is None:
        f = component(unit_holder(builtin_drift("abs_pow", alpha, 1)))
    rng = experiment_seed(seed, "heat_kernel", 0).generator()
    centre = rng.uniform(-2.0, 2.0, n_trials)
    z = rng.standard_normal((n_trials, 4))
    table = []
    first, second = [], []
    for t in t_values:
        scale = t**H
        x = centre[:, None] + scale * z
        p = gaussian_semigroup_apply(f, hurst, t, x.reshape(-1, 1), quadrature_nodes).reshape(n_trials, 4)
        x1, x2, x3, x4 = x.T
        lhs1 = np.abs(p[:, 0] - p[:, 1])
        rhs1 = t ** (H * (alpha - 1)) * np.abs(x1 - x2)
        lhs2 = np.abs(p[:, 0] - p[:, 1] - p[:, 2] + p[:, 3])
        rhs2 = t ** (H * (alpha - 1)) * np.abs(x1 - x2 - x3 + x4) + t ** (H * (alpha - 2)) * np.abs(
            (x1 - x2) * (x1 - x3))
        r1 = float(np.max(lhs1 / rhs1))
        r2 = float(np.max(lhs2 / rhs2))
        first.append(r1)
        second.append(r2)
        table.append({"t": t, "max_ratio_first": r1, "max_ratio_second": r2})

    def growth(vals):
        if max(vals) == 0.0 or min(vals) <= 0.0:
            return 0.0
        return loglog_fit(t_values, vals).slope

    g1, g2 = growth(first), growth(second)
    finite = all(math.isfinite(v) for v in first + second)
    passed = finite and g1 >= -growth_tol and g2 >= -growth_tol
    metrics = {"max_ratio_first": max(first), "max_ratio_second": max(second),
               "slope_first": g1, "slope_second": g2}
    config = {"h": H, "alpha": alpha, "n_trials": n_trials, "t_values": t_values, "f": f_name,
              "quadrature_nodes": quadrature_nodes, "growth_tol": growth_tol}
    return ExperimentReport("heat_kernel", config, metrics, bool(passed), seed, time.perf_counter() - t0,
                            table, ("t", "max_ratio_first", "max_ratio_second"))
