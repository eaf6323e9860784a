"""Conditional structure of B^H given the driving noise up to time s.

Given the past, ``B^H_t = E^s B^H_t + R_{s,t}`` where the remainder is the
Wiener integral of ``(t-r)^{H-1/2} / prod_{i=1}^{floor H}(H-i+1/2)`` over
``[s, t]``. It is independent of the past and has variance ``d c(H) (t-s)^{2H}``.
"""

from __future__ import annotations

import math

import numpy as np
from scipy import signal

from .generate import iterated_integrals, mvn_from_increments
from .types import Hurst, MvnSimulation, validate_hurst


def kernel_normaliser(h: Hurst) -> float:
    """``prod_{i=1}^{floor H} (H - i + 1/2)``; equals 1 for H < 1."""
    return math.prod(h.value - i + 0.5 for i in range(1, h.integer_part + 1))


def c_of_H(h) -> float:
    """Local nondeterminism constant: ``E|B_t - E^s B_t|^2 = d c(H) |t-s|^{2H}``."""
    h = validate_hurst(h)
    return 1.0 / (2.0 * h.value) / kernel_normaliser(h) ** 2


def remainder_weights(h, n_cells: int, dt: float) -> np.ndarray:
    """Cell averages of the remainder kernel for lags 1..n_cells (lag 1 = last cell).

    Integrating the kernel exactly over each cell keeps the H < 1/2 singularity
    at r = t finite.
    """
    h = validate_hurst(h)
    a = h.value + 0.5
    k = np.arange(1, n_cells + 1, dtype=float)
    return (k**a - (k - 1) ** a) / a * dt ** (h.value - 0.5) / kernel_normaliser(h)


def conditional_remainder_exact(w_increments, h, dt: float) -> np.ndarray:
    """Sample of ``B^H_t - E^s B^H_t`` from the W increments on ``[s, t]``.

    ``w_increments`` has shape ``(..., m, d)`` with m uniform cells of width
    ``dt`` covering ``[s, t]``; the leading axes are batch axes.
    """
    inc = np.asarray(w_increments, dtype=float)
    m = inc.shape[-2]
    if m == 0:
        return np.zeros(inc.shape[:-2] + inc.shape[-1:])
    w = remainder_weights(h, m, dt)[::-1]
    return np.einsum("...md,m->...d", inc, w)


def conditional_remainder_path(w_increments, h, dt: float) -> np.ndarray:
    """Remainders ``R_{s, s + j dt}`` for j = 0..m, shape ``(..., m + 1, d)``."""
    inc = np.asarray(w_increments, dtype=float)
    m = inc.shape[-2]
    out = np.zeros(inc.shape[:-2] + (m + 1, inc.shape[-1]))
    if m == 0:
        return out
    w = remainder_weights(h, m, dt)
    shape = (1,) * (inc.ndim - 2) + (m, 1)
    out[..., 1:, :] = signal.fftconvolve(inc, w.reshape(shape), axes=-2)[..., :m, :]
    return out


def conditional_mean_levels(sim: MvnSimulation, s: float) -> np.ndarray:
    """All levels of ``E^s`` of the path on ``[s, end]``, shape ``(L, n - i_s + 1, d)``.

    The base is recomputed with the W increments after ``s`` set to zero; the
    iterated integrals then restart at ``s`` from the frozen values of the path.
    """
    grid = sim.grid
    i_s = grid.index_of(s)
    inc = np.array(sim.w_increments, copy=True)
    inc[sim.past_steps + i_s :] = 0.0
    base = mvn_from_increments(sim.hurst.fractional_part, grid.dt, inc, sim.past_steps)[i_s:]
    levels = sim.path.levels
    base[0] = levels[0, i_s]
    return iterated_integrals(base, sim.hurst.integer_part, grid.dt, initial=levels[1:, i_s])


def conditional_mean(sim: MvnSimulation, s: float) -> np.ndarray:
    """``E^s B^H_t`` for grid times ``t >= s``, shape ``(n - i_s + 1, d)``."""
    return conditional_mean_levels(sim, s)[-1]


def conditional_mean_via_remainder(sim: MvnSimulation, s: float) -> np.ndarray:
    """Second route to :func:`conditional_mean`: the path minus the exact remainder."""
    grid = sim.grid
    i_s = grid.index_of(s)
    future = sim.w_increments[sim.past_steps + i_s :]
    rem = conditional_remainder_path(future, sim.hurst, grid.dt)
    return sim.path.top[i_s:] - rem
