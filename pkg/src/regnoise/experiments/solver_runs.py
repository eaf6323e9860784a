"""Experiments on the drift component: conditional expansion rate, uniqueness, contraction."""

from __future__ import annotations

import math
import time

import numpy as np
from scipy import integrate

from ..errors import ConditionViolated, MaxItersExceeded
from ..fit import loglog_fit
from ..noise.conditional import conditional_mean_levels, conditional_remainder_path
from ..noise.generate import gen_mvn_fbm, iterated_integrals, sample_path
from ..noise.holder import _norm, holder_norm_path, split_exponent, stopping_index
from ..noise.types import TimeGrid, validate_hurst
from ..rng import experiment_seed, parallel_map
from ..solver.conditions import choose_epsilon, gamma_recursion, strong_condition, weak_condition
from ..solver.drift import DriftSpec, builtin_drift
from ..solver.euler import euler_system_solve
from ..solver.picard import SolverConfig, half_holder, picard_chain, picard_solve
from .report import ExperimentReport

DEFAULT_EXPANSION_SPACINGS = tuple(2.0**-k for k in range(2, 8))


def _solve(path, drift, cfg, init="zero", tau_idx=None):
    try:
        return picard_solve(path, drift, cfg, init, tau_idx)
    except MaxItersExceeded as exc:
        return exc.state


def _admissible_eps(H: float, alpha: float) -> float:
    if strong_condition(H, alpha):
        return choose_epsilon(H, alpha)
    if weak_condition(H, alpha):
        # half-way to the largest eps with 1 + alpha (H - eps) > H
        return 0.5 * (H - (H - 1.0) / alpha)
    raise ConditionViolated(f"alpha={alpha} satisfies neither 1 - 1/(2H) nor 1 - 1/H at H={H}")


def _window_stopping(prefix_norm_parts, g_prefix, top_window, g_window, frac, dt, K):
    """Stopping offsets inside the window for a batch of continuations.

    ``g_window`` has shape ``(m + 1, B, d)``; row 0 is the shared point s.
    Returns for each continuation the first window offset whose running norm
    exceeds K, or a large sentinel.
    """
    sup0, semi0 = prefix_norm_parts
    m1, nb, _ = g_window.shape
    i_s = g_prefix.shape[0] - 1
    sup = np.maximum(sup0, np.maximum.accumulate(_norm(top_window), axis=0))
    ending = np.zeros((m1, nb))
    lag_prefix = (i_s - np.arange(i_s + 1))[None, :]
    for j in range(1, m1):
        a = _norm(g_window[j][:, None, :] - g_prefix[None, :, :]) / (((j + lag_prefix) * dt) ** frac)
        e = a.max(axis=1)
        if j > 1:
            lags = j - np.arange(1, j)
            b = _norm(g_window[j][None] - g_window[1:j]) / ((lags * dt) ** frac)[:, None]
            e = np.maximum(e, b.max(axis=0))
        ending[j] = e
    semi = np.maximum(semi0, np.maximum.accumulate(ending, axis=0))
    over = (sup + semi) > K
    first = np.where(over.any(axis=0), over.argmax(axis=0), np.iinfo(np.int64).max // 4)
    return first


def _prefix_norm_parts(path, eps, i_s):
    h = path.hurst.value
    whole, frac = split_exponent(h - eps)
    g = path.derivative(whole)
    sup0 = float(_norm(path.top[: i_s + 1]).max())
    semi0 = 0.0
    n = i_s + 1
    for lag in range(1, n):
        semi0 = max(semi0, float(_norm(g[lag:n] - g[: n - lag]).max()) / (lag * path.grid.dt) ** frac)
    return (sup0, semi0), g[: i_s + 1], whole, frac


def _window_picard(phi_s, frozen_past, tau_off, top, drift, dt, tol, max_iters, init):
    """Solve the stopped equation on [s, s + m dt] for a batch of noise continuations.

    ``top`` has shape (m + 1, B, d). ``tau_off`` is the stopping offset per
    continuation, negative when stopping happened before s (then the frozen
    value ``frozen_past`` applies throughout).
    """
    m1 = top.shape[0]
    if drift.is_zero:
        return np.broadcast_to(phi_s, top.shape).copy()
    past = tau_off < 0
    idx = np.minimum(np.arange(m1)[:, None], np.maximum(tau_off, 0)[None, :])
    cols = np.arange(top.shape[1])[None, :]
    phi = np.broadcast_to(init[:, None, :], top.shape).copy()
    for _ in range(max_iters):
        frozen = phi[idx, cols]
        frozen[:, past] = frozen_past
        new = phi_s + integrate.cumulative_trapezoid(drift(frozen + top), dx=dt, axis=0, initial=0.0)
        delta = float(np.max(np.abs(new - phi)))
        phi = new
        if delta < tol:
            break
    return phi


def _expansion_outer(hurst, drift, K, eps, s, offsets, n_inner, grid, past_truncation, conditional, tol,
                     max_iters, rs):
    sim = gen_mvn_fbm(hurst, grid, drift.dim, past_truncation, rs.child(0))
    path = sim.path
    norm = holder_norm_path(path, eps)
    hit = np.flatnonzero(norm > K)
    tau = int(hit[0]) if hit.size else grid.n_steps
    cfg = SolverConfig(K=K, eps=eps, tol=tol, max_iters=max_iters)
    phi = _solve(path, drift, cfg, tau_idx=tau).phi
    i_s = grid.index_of(s)
    m = max(offsets)
    outer = phi[i_s + np.asarray(offsets)]
    if not conditional:
        return _norm(outer - phi[i_s]).tolist()

    half = n_inner // 2
    dw = rs.child(1).generator().standard_normal((half, m, drift.dim)) * math.sqrt(grid.dt)
    dw = np.concatenate([dw, -dw])
    fluct = np.moveaxis(conditional_remainder_path(dw, hurst.fractional, grid.dt), 0, 1)
    mean_levels = conditional_mean_levels(sim, s)[:, : m + 1]
    levels = iterated_integrals(fluct, hurst.integer_part, grid.dt) + mean_levels[:, :, None, :]
    top = levels[-1]
    if tau <= i_s:
        tau_off = np.full(n_inner, -1)
    else:
        parts, g_prefix, whole, frac = _prefix_norm_parts(path, eps, i_s)
        g_window = levels[hurst.integer_part - whole]
        tau_off = _window_stopping(parts, g_prefix, top, g_window, frac, grid.dt, K)
    phi_in = _window_picard(phi[i_s], phi[min(tau, i_s)], tau_off, top, drift, grid.dt, tol, max_iters,
                            phi[i_s : i_s + m + 1])
    cond = phi_in.mean(axis=1)
    return _norm(outer - cond[np.asarray(offsets)]).tolist()


def expansion_rate_experiment(h, alpha: float, K: float = 5.0, spacings=DEFAULT_EXPANSION_SPACINGS,
                              n_outer: int = 100, n_inner: int = 64, seed: int = 0, eps: float | None = None,
                              s: float = 0.5, grid_n: int = 1024, drift: str = "abs_pow", dim: int = 1,
                              past_truncation: float = 50.0, conditional: bool = True,
                              slope_slack: float = 0.15, tol: float = 1e-12, max_iters: int = 80,
                              workers: int | None = None) -> ExperimentReport:
    """Rate of ``E|phi_t - E^s phi_t|`` as ``t - s -> 0``.

    For each outer path the future after ``s`` is resampled ``n_inner`` times
    (antithetic pairs) from the exact conditional law of the grid noise, the
    stopping time is recomputed on each continuation and the stopped equation
    is re-solved on the window; the mean over continuations estimates
    ``E^s phi_t``. With ``conditional=False`` the plain increment
    ``phi_t - phi_s`` is used instead.
    """
    t0 = time.perf_counter()
    hurst = validate_hurst(h)
    H = hurst.value
    if eps is None:
        eps = _admissible_eps(H, alpha)
    elif not (strong_condition(H, alpha) or weak_condition(H, alpha)):
        raise ConditionViolated(f"alpha={alpha} satisfies neither condition at H={H}")
    _, k0, target_exp = gamma_recursion(alpha, H, eps)
    if n_inner < 2 or n_inner % 2:
        raise ValueError("n_inner must be an even number >= 2")
    grid = TimeGrid(grid_n)
    spacings = [float(x) for x in spacings]
    offsets = [int(round(x / grid.dt)) for x in spacings]
    if len(spacings) < 3 or min(offsets) < 1 or grid.index_of(s) + max(offsets) > grid.n_steps:
        raise ValueError("need >= 3 spacings that are positive grid multiples with s + spacing <= 1")
    drift_spec = builtin_drift(drift, alpha, dim) if isinstance(drift, str) else drift
    drift_name = drift if isinstance(drift, str) else drift_spec.name

    def run(o):
        return _expansion_outer(hurst, drift_spec, K, eps, s, offsets, n_inner, grid, past_truncation,
                                conditional, tol, max_iters,
                                experiment_seed(seed, f"expansion_rate:{H!r}:{alpha!r}", o))

    errs = np.array(parallel_map(run, range(n_outer), workers))
    means = errs.mean(axis=0)
    ses = errs.std(axis=0, ddof=1) / math.sqrt(n_outer) if n_outer > 1 else np.zeros_like(means)
    threshold = target_exp - slope_slack if conditional else None
    table = [{"spacing": x, "mean_abs_error": float(a), "std_error": float(b)}
             for x, a, b in zip(spacings, means, ses)]
    metrics = {"target_exponent": target_exp, "k0": float(k0), "eps": eps,
               "max_mean_error": float(means.max())}
    if np.all(means > 0):
        fit = loglog_fit(spacings, means)
        metrics.update(slope=fit.slope, slope_stderr=fit.stderr, r_squared=fit.r_squared)
        if conditional:
            passed = fit.slope >= threshold and (fit.slope > H or not weak_condition(H, alpha))
        else:
            passed = abs(fit.slope - 1.0) <= slope_slack
    else:
        # identically zero error: deterministic drift part
        metrics.update(degenerate=1.0)
        passed = bool(np.all(means <= 1e-12))
    config = {"h": H, "alpha": alpha, "K": K, "eps": eps, "spacings": spacings, "n_outer": n_outer,
              "n_inner": n_inner, "s": s, "grid_n": grid_n, "drift": drift_name, "dim": dim,
              "past_truncation": past_truncation, "conditional": conditional, "slope_slack": slope_slack,
              "tol": tol, "max_iters": max_iters}
    return ExperimentReport("expansion_rate", config, metrics, bool(passed), seed, time.perf_counter() - t0,
                            table, ("spacing", "mean_abs_error", "std_error"))


def _uniqueness_path(hurst, drift, cfg, grid, rs):
    path = sample_path(hurst, grid, drift.dim, rs)
    tau = stopping_index(path, cfg.K, cfg.eps)
    a = _solve(path, drift, cfg, "zero", tau)
    b = _solve(path, drift, cfg, "linear", tau)
    eul = euler_system_solve(path, drift)
    stop = slice(0, tau + 1)
    xa = a.phi[stop] + path.top[stop]
    xb = b.phi[stop] + path.top[stop]
    xe = eul.x[stop]
    metric = max(float(np.max(_norm(xa - xb))), float(np.max(_norm(xa - xe))), float(np.max(_norm(xb - xe))))
    osc = float(np.ptp(path.base, axis=0).max())
    drift_sup = float(np.max(_norm(drift(xa)))) if not drift.is_zero else 0.0
    converged = bool(a.meta.get("converged", False) and b.meta.get("converged", False))
    ratio = a.geometric_ratio()
    return metric, 1.0 + drift_sup + osc, converged, ratio


def uniqueness_probe(h, alpha: float, K: float = 5.0, n_paths: int = 100, seed: int = 0, grid_n: int = 1024,
                     drift: str = "abs_pow", dim: int = 1, eps: float | None = None, tol: float | None = None,
                     min_pass_fraction: float = 0.95, workers: int | None = None) -> ExperimentReport:
    """Agreement of Picard (zero and linear starts) and the Euler system scheme up to tau_K.

    Per path the metric is the largest pairwise sup distance of the three
    solutions on ``[0, tau_K]``; it passes below
    ``10 (tol + dt^{min(1, alpha)} scale)`` with ``scale = 1 + sup|b(X)| + osc(U^1)``.
    """
    t0 = time.perf_counter()
    hurst = validate_hurst(h)
    H = hurst.value
    cfg = SolverConfig.for_problem(H, alpha, K=K, tol=tol) if eps is None else SolverConfig(K=K, eps=eps, tol=tol)
    drift_spec = builtin_drift(drift, alpha, dim) if isinstance(drift, str) else drift
    drift_name = drift if isinstance(drift, str) else drift_spec.name
    grid = TimeGrid(grid_n)
    tol_value = cfg.tolerance(drift_spec)

    def run(i):
        return _uniqueness_path(hurst, drift_spec, cfg, grid,
                                experiment_seed(seed, f"uniqueness:{H!r}:{alpha!r}", i))

    rows = parallel_map(run, range(n_paths), workers)
    metric = np.array([r[0] for r in rows])
    thresholds = np.array([10.0 * (tol_value + grid.dt ** min(1.0, alpha) * r[1]) for r in rows])
    ok = metric < thresholds
    median_metric = float(np.median(metric))
    median_thr = float(np.median(thresholds))
    ratios = np.array([r[3] for r in rows])
    pass_fraction = float(ok.mean())
    passed = median_metric < median_thr and pass_fraction >= min_pass_fraction
    metrics = {"median_metric": median_metric, "median_threshold": median_thr, "pass_fraction": pass_fraction,
               "converged_fraction": float(np.mean([r[2] for r in rows])),
               "median_contraction_ratio": float(np.median(ratios))}
    config = {"h": H, "alpha": alpha, "K": K, "eps": cfg.eps, "n_paths": n_paths, "grid_n": grid_n,
              "drift": drift_name, "dim": dim, "tol": tol_value, "min_pass_fraction": min_pass_fraction}
    table = [{"path": i, "metric": float(m), "threshold": float(t), "passed": bool(p), "converged": r[2]}
             for i, (m, t, p, r) in enumerate(zip(metric, thresholds, ok, rows))]
    return ExperimentReport("uniqueness", config, metrics, bool(passed), seed, time.perf_counter() - t0,
                            table, ("path", "metric", "threshold", "passed", "converged"))


DEFAULT_SCAN_H = (0.75, 1.25, 1.5, 1.75, 2.05, 2.5, 3.25, 4.5)
DEFAULT_SCAN_ALPHA = (0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 1.0)
SCAN_HEADER = ("H", "alpha", "strong", "weak", "median_metric", "ratio")


def threshold_scan(h_list=DEFAULT_SCAN_H, alpha_list=DEFAULT_SCAN_ALPHA, K: float = 5.0, n_paths: int = 8,
                   seed: int = 0, grid_n: int = 256, workers: int | None = None) -> ExperimentReport:
    """Empirical phase diagram: uniqueness metric and Picard contraction ratio per (H, alpha)."""
    t0 = time.perf_counter()
    h_list = [float(validate_hurst(x).value) for x in h_list]
    alpha_list = [float(a) for a in alpha_list]
    if len(h_list) * len(alpha_list) > 64:
        raise ValueError("threshold_scan grids are limited to 8 x 8 cells")
    table = []
    strong_ok = True
    for H in h_list:
        for a in alpha_list:
            rep = uniqueness_probe(H, a, K, n_paths, seed, grid_n, workers=workers)
            strong = strong_condition(H, a)
            if strong:
                strong_ok &= rep.passed
            table.append({"H": H, "alpha": a, "strong": strong, "weak": weak_condition(H, a),
                          "median_metric": rep.metrics["median_metric"],
                          "ratio": rep.metrics["median_contraction_ratio"], "passed": rep.passed})
    n_strong = sum(r["strong"] for r in table)
    metrics = {"cells": float(len(table)), "strong_cells": float(n_strong),
               "strong_cells_passed": float(sum(r["passed"] for r in table if r["strong"])),
               "cells_passed": float(sum(r["passed"] for r in table))}
    config = {"h_list": h_list, "alpha_list": alpha_list, "K": K, "n_paths": n_paths, "grid_n": grid_n}
    return ExperimentReport("threshold_scan", config, metrics, bool(strong_ok), seed, time.perf_counter() - t0,
                            table, SCAN_HEADER)


DEFAULT_T_SMALL = (0.05, 0.1, 0.2, 0.4)


def _contraction_path(hurst, drift, cfg, grid, t_small, depth, rs):
    path = sample_path(hurst, grid, drift.dim, rs)
    tau = stopping_index(path, cfg.K, cfg.eps)
    out = []
    for T in t_small:
        n_t = int(round(T / grid.dt))
        sub = path.truncated(n_t)
        tau_t = min(tau, n_t)
        chain = picard_chain(sub, drift, cfg, depth, "zero", tau_t)
        idx = np.minimum(np.arange(n_t + 1), tau_t)
        stopped = [c.phi[idx] for c in chain]
        out.append([half_holder(b - a, grid.dt) for a, b in zip(stopped[:-1], stopped[1:])])
    return out


def contraction_rate_experiment(h, alpha: float, K: float = 5.0, T_small=DEFAULT_T_SMALL, n_paths: int = 100,
                                seed: int = 0, grid_n: int = 1024, drift: str = "abs_pow", dim: int = 1,
                                eps: float | None = None, n_ratios: int = 3, ratio_threshold: float = 0.9,
                                T_ref: float = 0.1, workers: int | None = None) -> ExperimentReport:
    """Ratio of successive stopped Picard-iterate distances in the 1/2-Hölder seminorm on ``[0, T]``.

    Iterates start from zero; after ``k0`` applications the p-th moments over
    paths of ``[T^{k+1} - T^k]_{1/2}`` are formed and their ratios averaged
    over ``n_ratios`` further steps.
    """
    t0 = time.perf_counter()
    hurst = validate_hurst(h)
    H = hurst.value
    cfg = SolverConfig.for_problem(H, alpha, K=K) if eps is None else SolverConfig(K=K, eps=eps)
    if not weak_condition(H, alpha):
        raise ConditionViolated(f"alpha={alpha} does not exceed 1 - 1/H at H={H}")
    _, k0, _ = gamma_recursion(alpha, H, cfg.eps)
    t_small = sorted(float(x) for x in (T_small if np.ndim(T_small) else [T_small]))
    if any(not 0 < x <= 1 for x in t_small):
        raise ValueError("T_small values must lie in (0, 1]")
    grid = TimeGrid(grid_n)
    for x in t_small:
        if int(round(x / grid.dt)) < 2:
            raise ValueError(f"T_small={x} resolves to fewer than two grid steps")
    drift_spec = builtin_drift(drift, alpha, dim) if isinstance(drift, str) else drift
    drift_name = drift if isinstance(drift, str) else drift_spec.name
    depth = k0 + n_ratios + 1

    def run(i):
        return _contraction_path(hurst, drift_spec, cfg, grid, t_small, depth,
                                 experiment_seed(seed, f"contraction:{H!r}:{alpha!r}", i))

    dists = np.array(parallel_map(run, range(n_paths), workers))  # (paths, T, depth)
    p = cfg.p_moment
    moments = np.mean(dists**p, axis=0) ** (1.0 / p)
    table = []
    ratios = []
    degenerate = False
    for j, T in enumerate(t_small):
        mk = moments[j, k0 : k0 + n_ratios + 1]
        if np.any(mk[:-1] <= 0):
            degenerate = True
            r = 0.0
        else:
            r = float(np.mean(mk[1:] / mk[:-1]))
        ratios.append(r)
        table.append({"T_small": T, "ratio": r, "distance_k0": float(mk[0])})
    metrics = {"k0": float(k0), "eps": cfg.eps}
    for T, r in zip(t_small, ratios):
        metrics[f"ratio_T{T!r}"] = r
    ref = min(t_small, key=lambda x: abs(x - T_ref))
    ref_ratio = ratios[t_small.index(ref)]
    if degenerate:
        metrics["degenerate"] = 1.0
        passed = True
    else:
        metrics["ratio_ref"] = ref_ratio
        passed = ref_ratio < ratio_threshold
        if len(t_small) >= 3:
            fit = loglog_fit(t_small, ratios)
            metrics.update(slope=fit.slope, slope_stderr=fit.stderr)
            passed = passed and fit.slope > 0
    config = {"h": H, "alpha": alpha, "K": K, "eps": cfg.eps, "T_small": t_small, "n_paths": n_paths,
              "grid_n": grid_n, "drift": drift_name, "dim": dim, "n_ratios": n_ratios,
              "ratio_threshold": ratio_threshold, "T_ref": ref, "p_moment": p}
    return ExperimentReport("contraction", config, metrics, bool(passed), seed, time.perf_counter() - t0,
                            table, ("T_small", "ratio", "distance_k0"))
