"""Sewing engine demonstration: exact limits, telescoping and an Itô isometry check."""

from __future__ import annotations

import math
import time

import numpy as np

from ..rng import experiment_seed, parallel_map
from ..sewing import Germ, Partition, dyadic_sew, mesh_stats, rho_refine, riemann_sum, telescoping_check
from .report import ExperimentReport


def left_point_germ() -> Germ:
    """``A_{s,t} = s (t - s)``; sews to ``(T^2 - S^2) / 2``."""
    return Germ(lambda s, t: s * (t - s), "left_point")


def square_germ() -> Germ:
    """``A_{s,t} = (t - s)^2``; sews to zero."""
    return Germ(lambda s, t: (t - s) ** 2, "square")


def brownian_on_dyadics(level: int, rng, T: float = 1.0) -> tuple[np.ndarray, np.ndarray]:
    t = T * np.arange(2**level + 1) / 2**level
    w = np.concatenate([[0.0], np.cumsum(rng.standard_normal(2**level)) * math.sqrt(T / 2**level)])
    return t, w


def ito_germ(times: np.ndarray, w: np.ndarray) -> Germ:
    """``A_{s,t} = W_s (W_t - W_s)`` with W linearly interpolated between samples."""
    def ev(s, t):
        ws, wt = np.interp(s, times, w), np.interp(t, times, w)
        return ws * (wt - ws)
    return Germ(ev, "ito")


def random_regular_partition(rng, S: float = 0.0, T: float = 1.0, max_points: int = 400) -> Partition:
    n = int(rng.integers(2, max_points))
    steps = rng.uniform(1.0, 2.0, n)
    pts = S + (T - S) * np.concatenate([[0.0], np.cumsum(steps) / steps.sum()])
    pts[-1] = T
    return Partition(pts)


def _ito_path(level, rs):
    t, w = brownian_on_dyadics(level, rs.generator())
    res = dyadic_sew(ito_germ(t, w), 0.0, 1.0, max_level=level, min_level=1)
    return float(res.limit[0]), float(w[-1])


def sewing_demo_experiment(n_paths: int = 200, n_partitions: int = 50, level: int = 14, seed: int = 0,
                           n_se: float = 3.0, telescoping_tol: float = 1e-12,
                           workers: int | None = None) -> ExperimentReport:
    t0 = time.perf_counter()
    if n_paths < 2:
        raise ValueError("n_paths must be at least 2")
    rng = experiment_seed(seed, "sewing_demo", 0).generator()

    lp = dyadic_sew(left_point_germ(), 0.0, 1.0, max_level=20)
    lp_err = abs(float(lp.limit[0]) - 0.5)

    bt, bw = brownian_on_dyadics(level, rng)
    germs = [left_point_germ(), square_germ(), ito_germ(bt, bw)]
    worst_tel = 0.0
    min_growth = math.inf
    all_regular = True
    for _ in range(n_partitions):
        p = random_regular_partition(rng)
        q = rho_refine(p)
        if p.n > 1:
            min_growth = min(min_growth, mesh_stats(q).mean_mesh / mesh_stats(p).mean_mesh)
        all_regular &= mesh_stats(q).is_regular
        for g in germs:
            scale = 1.0 + float(np.max(np.abs(riemann_sum(g, p)))) + float(np.max(np.abs(riemann_sum(g, q))))
            worst_tel = max(worst_tel, telescoping_check(g, p) / scale)

    rows = parallel_map(lambda i: _ito_path(level, experiment_seed(seed, "sewing_demo_ito", i)),
                        range(n_paths), workers)
    limits = np.array([r[0] for r in rows])
    w_end = np.array([r[1] for r in rows])
    sq = limits**2
    dt = 2.0**-level
    target = 0.5 * (1.0 - dt)  # E(sum W dW)^2 on the finest grid
    se = float(sq.std(ddof=1) / math.sqrt(n_paths))
    z = (float(sq.mean()) - target) / se
    ito_identity = float(np.max(np.abs(limits - 0.5 * (w_end**2 - 1.0))))

    metrics = {"left_point_error": lp_err, "telescoping_max_rel": worst_tel, "rho_min_growth": min_growth,
               "ito_second_moment": float(sq.mean()), "ito_std_error": se, "ito_z_score": z,
               "ito_identity_max_gap": ito_identity}
    passed = (lp_err <= 2.0**-20 and worst_tel <= telescoping_tol and min_growth >= 1.5 * (1 - 1e-12)
              and all_regular and abs(z) <= n_se)
    config = {"n_paths": n_paths, "n_partitions": n_partitions, "level": level, "n_se": n_se,
              "telescoping_tol": telescoping_tol}
    return ExperimentReport("sewing_demo", config, metrics, bool(passed), seed, time.perf_counter() - t0)
