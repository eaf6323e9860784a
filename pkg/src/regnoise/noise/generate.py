"""Sampling of fractional Brownian motion on uniform grids.

Two generators live here. :func:`gen_base_fbm_exact` draws paths with the exact
fBm covariance by circulant embedding (Cholesky for small non-standard grids);
it is the workhorse for unconditional statistics. :func:`gen_mvn_fbm`
discretises the Mandelbrot-van Ness moving average on a truncated past and
keeps the driving increments, which is what every conditioning experiment needs.
"""

from __future__ import annotations

import functools
import math

import numpy as np
from scipy import integrate, linalg, signal

from ..errors import GridTooLarge, HurstMismatch
from ..rng import RngSeed, as_generator
from .types import Hurst, MultiLevelPath, MvnSimulation, TimeGrid, validate_hurst

DEFAULT_PAST_TRUNCATION = 50.0
CHOLESKY_LIMIT = 4096


@functools.lru_cache(maxsize=64)
def mvn_variance(h: float) -> float:
    """Variance at t=1 of the unnormalised moving-average fBm, by quadrature.

    Integrates ``((1+u)^{h-1/2} - u^{h-1/2})^2`` over the half line and adds the
    contribution ``1/(2h)`` of the window ``[0, 1]``.
    """
    a = h - 0.5

    def near_part(u):
        return ((1.0 + u) ** a - u**a) ** 2

    def far_part(v):
        # u = 1/v maps [1, inf) to (0, 1]; the v^(-2a) factor goes into the weight
        return (np.expm1(a * np.log1p(v)) / v) ** 2 if v > 0 else a * a

    near, _ = integrate.quad(near_part, 0.0, 1.0, limit=400, epsabs=1e-14, epsrel=1e-12)
    far, _ = integrate.quad(far_part, 0.0, 1.0, weight="alg", wvar=(-2.0 * a, 0.0))
    return near + far + 1.0 / (2.0 * h)


def fgn_autocovariance(h: float, n: int, dt: float) -> np.ndarray:
    k = np.arange(n + 1, dtype=float)
    two_h = 2.0 * h
    return 0.5 * dt**two_h * (np.abs(k + 1) ** two_h - 2 * k**two_h + np.abs(k - 1) ** two_h)


def _circulant_sqrt_eigs(h: float, n: int, dt: float) -> np.ndarray | None:
    gam = fgn_autocovariance(h, n, dt)
    row = np.concatenate([gam, gam[-2:0:-1]])
    eig = np.fft.fft(row).real
    if eig.min() < -1e-10 * eig.max():
        return None
    return np.sqrt(np.clip(eig, 0.0, None) / row.size)


def _fbm_covariance(h: float, t: np.ndarray) -> np.ndarray:
    s, u = np.meshgrid(t, t, indexing="ij")
    two_h = 2.0 * h
    return 0.5 * (np.abs(s) ** two_h + np.abs(u) ** two_h - np.abs(s - u) ** two_h)


def gen_base_fbm_exact(
    h,
    grid: TimeGrid,
    dim: int = 1,
    seed: RngSeed | int | None = None,
    mvn_scale: bool = False,
) -> MultiLevelPath:
    """Exact-covariance fBm with Hurst index in (0, 1).

    Per component ``Cov(B_s, B_t) = sigma^2 (|s|^{2H} + |t|^{2H} - |t-s|^{2H}) / 2``
    with ``sigma^2 = 1``, or ``sigma^2 = mvn_variance(H)`` when ``mvn_scale`` is set
    (the normalisation of the raw moving-average representation).
    """
    hurst = validate_hurst(h)
    if hurst.integer_part != 0:
        raise HurstMismatch(f"exact generator needs H in (0,1), got {hurst.value}; use lift()")
    if dim < 1:
        raise ValueError(f"dim must be positive, got {dim}")
    rng = as_generator(seed)
    n = grid.n_steps
    out = np.zeros((n + 1, dim))
    method = "circulant"
    sq = _circulant_sqrt_eigs(hurst.value, n, grid.dt) if grid.start == 0.0 else None
    if sq is not None:
        m = sq.size
        for c in range(dim):
            z = rng.standard_normal(m) + 1j * rng.standard_normal(m)
            fgn = np.fft.fft(sq * z)[:n].real
            out[1:, c] = np.cumsum(fgn)
    else:
        method = "cholesky"
        if n + 1 > CHOLESKY_LIMIT:
            raise GridTooLarge(
                f"circulant embedding not usable and {n + 1} points exceed the Cholesky limit"
            )
        t = grid.points
        nz = np.abs(t) > 0
        cov = _fbm_covariance(hurst.value, t[nz])
        try:
            chol = linalg.cholesky(cov, lower=True)
        except linalg.LinAlgError as exc:
            raise GridTooLarge("covariance matrix is not numerically positive definite") from exc
        out[nz] = chol @ rng.standard_normal((int(nz.sum()), dim))
    if mvn_scale:
        out *= math.sqrt(mvn_variance(hurst.value))
    return MultiLevelPath(
        hurst,
        grid,
        out[None],
        meta={"generator": "exact", "method": method, "mvn_scale": bool(mvn_scale)},
    )


def mvn_cell_weights(h_frac: float, n_lags: int, dt: float) -> np.ndarray:
    """Cell averages of ``x^{h-1/2}`` over ``[(k-1)dt, k dt]`` for k = 1..n_lags.

    Evaluated in index units so that the Brownian case h = 1/2 gives exact ones.
    """
    a = h_frac + 0.5
    k = np.arange(1, n_lags + 1, dtype=float)
    return (k**a - (k - 1) ** a) / a * dt ** (h_frac - 0.5)


def mvn_from_increments(h_frac: float, dt: float, increments: np.ndarray, past_steps: int) -> np.ndarray:
    """Discretised Mandelbrot-van Ness integral on the non-negative grid points.

    ``increments`` holds W increments on ``[-past_steps dt, n dt]``, shape
    ``(past_steps + n, dim)``. Returns the base path at ``0, dt, ..., n dt``.
    """
    inc = np.asarray(increments, dtype=float)
    total = inc.shape[0]
    n = total - past_steps
    if n < 1 or past_steps < 0:
        raise ValueError("increments must cover the past window and at least one step")
    g = mvn_cell_weights(h_frac, total, dt)
    conv = signal.fftconvolve(inc, g[:, None], axes=0)[:total]
    out = np.zeros((n + 1, inc.shape[1]))
    anchor = conv[past_steps - 1] if past_steps > 0 else 0.0
    out[1:] = conv[past_steps : past_steps + n] - anchor
    return out


def gen_mvn_fbm(
    h,
    grid: TimeGrid,
    dim: int = 1,
    past_truncation: float = DEFAULT_PAST_TRUNCATION,
    seed: RngSeed | int | None = None,
) -> MvnSimulation:
    """Truncated Mandelbrot-van Ness simulation of B^H.

    The moving average of the fractional part of ``h`` is discretised on the
    grid extended back to ``-past_truncation``; each cell carries the exact cell
    average of the kernel, which also removes the singular cell for H < 1/2.
    Dropping the remote past biases the variance by O(T_past^(H-3/2)).
    If ``h > 1`` the base is lifted to B^H by iterated trapezoid integration.
    """
    hurst = validate_hurst(h)
    if grid.start != 0.0:
        raise ValueError("the moving-average generator is anchored at t=0; grid must start at 0")
    if past_truncation < 1:
        raise ValueError(f"past_truncation must be >= 1, got {past_truncation}")
    past_steps = int(round(past_truncation / grid.dt))
    rng = as_generator(seed)
    inc = rng.standard_normal((past_steps + grid.n_steps, dim)) * math.sqrt(grid.dt)
    base = mvn_from_increments(hurst.fractional_part, grid.dt, inc, past_steps)
    base_path = MultiLevelPath(
        hurst.fractional,
        grid,
        base[None],
        w_increments=inc,
        meta={"generator": "mvn", "past_truncation": float(past_truncation)},
    )
    path = lift(base_path, hurst) if hurst.integer_part else base_path
    full = TimeGrid(past_steps + grid.n_steps, -past_steps * grid.dt, grid.end)
    return MvnSimulation(float(past_truncation), past_steps, full, inc, path)


def iterated_integrals(base: np.ndarray, n_levels: int, dt: float, initial=None) -> np.ndarray:
    """Stack ``base`` and its ``n_levels`` iterated cumulative trapezoid integrals.

    ``initial`` optionally gives the starting value of each integrated level
    (length ``n_levels``); zeros otherwise.
    """
    base = np.asarray(base, dtype=float)
    out = np.empty((n_levels + 1,) + base.shape)
    out[0] = base
    for k in range(1, n_levels + 1):
        start = 0.0 if initial is None else initial[k - 1]
        out[k] = integrate.cumulative_trapezoid(out[k - 1], dx=dt, axis=0, initial=0.0) + start
    return out


def lift(base: MultiLevelPath, target) -> MultiLevelPath:
    """Extend a base fBm to Hurst index ``target`` by iterated time integration."""
    target = validate_hurst(target)
    if base.levels.shape[0] != 1 or abs(base.hurst.value - target.fractional_part) > 1e-9:
        raise HurstMismatch(
            f"base has H={base.hurst.value} with {base.levels.shape[0]} level(s); "
            f"target {target.value} needs a single base level of H={target.fractional_part}"
        )
    levels = iterated_integrals(base.base, target.integer_part, base.grid.dt)
    return MultiLevelPath(target, base.grid, levels, w_increments=base.w_increments, meta=dict(base.meta))


def sample_path(
    h,
    grid: TimeGrid,
    dim: int = 1,
    seed: RngSeed | int | None = None,
    generator: str = "exact",
    mvn_scale: bool = False,
    past_truncation: float = DEFAULT_PAST_TRUNCATION,
) -> MultiLevelPath:
    """Convenience wrapper: base sample from either generator, lifted to ``h``."""
    hurst = validate_hurst(h)
    if generator == "exact":
        return lift(gen_base_fbm_exact(hurst.fractional, grid, dim, seed, mvn_scale), hurst)
    if generator == "mvn":
        return gen_mvn_fbm(hurst, grid, dim, past_truncation, seed).path
    raise ValueError(f"unknown generator {generator!r}")
