"""Monte Carlo check of the conditional variance identity."""

from __future__ import annotations

import math
import time

import numpy as np

from ..fit import loglog_fit
from ..noise.conditional import c_of_H, conditional_remainder_exact
from ..noise.types import validate_hurst
from ..rng import experiment_seed, parallel_map
from .report import ExperimentReport

DEFAULT_SPACINGS = tuple(2.0**-k for k in range(8))


def _spacing_stats(h, spacing, n_samples, cells, dim, rs, batch=1000):
    rng = rs.generator()
    dt = spacing / cells
    total = 0.0
    total_sq = 0.0
    for start in range(0, n_samples, batch):
        m = min(batch, n_samples - start)
        inc = rng.standard_normal((m, cells, dim)) * math.sqrt(dt)
        r = conditional_remainder_exact(inc, h, dt)
        sq = np.sum(r * r, axis=-1)
        total += float(sq.sum())
        total_sq += float(np.dot(sq, sq))
    mean = total / n_samples
    var = max(total_sq / n_samples - mean * mean, 0.0) * n_samples / (n_samples - 1)
    return mean, math.sqrt(var / n_samples)


def variance_identity_experiment(h, spacings=DEFAULT_SPACINGS, n_samples: int = 10_000, seed: int = 0,
                                 dim: int = 1, cells: int = 1024, n_se: float = 3.0,
                                 slope_tol: float = 0.05, workers: int | None = None) -> ExperimentReport:
    """Compare ``E|B_t - E^s B_t|^2`` with ``d c(H) (t-s)^{2H}`` at several spacings.

    Each spacing is resolved with the same number of cells so the relative
    discretisation error does not depend on the spacing.
    """
    t0 = time.perf_counter()
    hurst = validate_hurst(h)
    spacings = [float(x) for x in spacings]
    if len(spacings) < 3:
        raise ValueError("need at least three spacings for a slope fit")
    if any(not 0 < x <= 1 for x in spacings):
        raise ValueError("spacings must lie in (0, 1]")
    if n_samples < 2:
        raise ValueError("n_samples must be at least 2")
    c = c_of_H(hurst)

    def run(i):
        return _spacing_stats(hurst, spacings[i], n_samples, cells, dim,
                              experiment_seed(seed, f"variance_identity:{hurst.value!r}:{dim}", i))

    stats = parallel_map(run, range(len(spacings)), workers)
    table = []
    metrics = {}
    all_within = True
    for i, (x, (mean, se)) in enumerate(zip(spacings, stats)):
        target = dim * c * x ** (2 * hurst.value)
        z = (mean - target) / se if se > 0 else 0.0
        ok = abs(z) <= n_se
        all_within &= ok
        table.append({"spacing": x, "mc_variance": mean, "std_error": se, "target": target,
                      "z_score": z, "within": ok})
        metrics[f"z_{i}"] = z
    fit = loglog_fit(spacings, [m for m, _ in stats])
    metrics.update(slope=fit.slope, slope_stderr=fit.stderr, target_slope=2 * hurst.value,
                   max_abs_z=max(abs(r["z_score"]) for r in table))
    slope_ok = abs(fit.slope - 2 * hurst.value) <= slope_tol
    config = {"h": hurst.value, "spacings": spacings, "n_samples": n_samples, "dim": dim, "cells": cells,
              "n_se": n_se, "slope_tol": slope_tol}
    return ExperimentReport(
        "variance_identity", config, metrics, bool(all_within and slope_ok), seed,
        time.perf_counter() - t0, table,
        ("spacing", "mc_variance", "std_error", "target", "z_score", "within"),
    )
