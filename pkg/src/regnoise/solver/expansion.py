"""Conditional Taylor-type expansions of Picard iterates.

For ``phi = T_K(psi)`` the order-k operator is

    A^(0)_{s,t} phi = phi_s,
    A^(k)_{s,t} phi = phi_s + int_s^t b(A^(k-1)_{s,r} psi + BB_{s,r}) dr,

with ``BB_{s,r}`` the Taylor polynomial of B^H at s. Everything on the right
is known at time s.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import integrate

from ..errors import ChainTooShallow
from ..noise.types import MultiLevelPath
from .drift import DriftSpec
from .picard import PicardState


def noise_taylor(path: MultiLevelPath, s: float, t) -> np.ndarray:
    """``sum_{i <= floor H} (t-s)^i / i! * d^i B^H_s`` for grid ``s`` and times ``t``.

    Returns shape ``(d,)`` for scalar ``t``, ``(m, d)`` otherwise.
    """
    i_s = path.grid.index_of(s)
    tt = np.atleast_1d(np.asarray(t, dtype=float))
    for ti in tt:
        path.grid.index_of(ti)
    if np.any(tt < s - 1e-12):
        raise ValueError("noise_taylor needs t >= s")
    out = _taylor(path, i_s, tt - path.grid.points[i_s])
    return out[0] if np.ndim(t) == 0 else out


def _taylor(path: MultiLevelPath, i_s: int, lag: np.ndarray) -> np.ndarray:
    k = path.hurst.integer_part
    out = np.zeros((lag.size, path.dim))
    for i in range(k + 1):
        out += (lag[:, None] ** i / math.factorial(i)) * path.derivative(i)[i_s]
    return out


@dataclass(frozen=True, eq=False)
class ExpansionOperator:
    """``chain[j] = T_K(chain[j-1])``; ``chain[-1]`` is the iterate being expanded."""

    order: int
    chain: tuple

    def __post_init__(self):
        if self.order < 0:
            raise ValueError("order must be non-negative")
        if len(self.chain) < self.order + 1:
            raise ChainTooShallow(f"order {self.order} needs a chain of depth {self.order + 1}, "
                                  f"got {len(self.chain)}")
        object.__setattr__(self, "chain", tuple(self.chain))


def expansion_path(op: ExpansionOperator, path: MultiLevelPath, drift: DriftSpec, s: float,
                   t_end: float | None = None) -> np.ndarray:
    """``A^(k)_{s,r} phi`` for every grid time ``r`` in ``[s, t_end]``."""
    grid = path.grid
    i_s = grid.index_of(s)
    i_e = grid.n_steps if t_end is None else grid.index_of(t_end)
    lag = grid.points[i_s : i_e + 1] - grid.points[i_s]
    taylor = _taylor(path, i_s, lag)
    chain: tuple[PicardState, ...] = op.chain[len(op.chain) - op.order - 1 :]
    cur = np.broadcast_to(chain[0].phi[i_s], taylor.shape).copy()
    for j in range(1, op.order + 1):
        f = drift(cur + taylor)
        cur = chain[j].phi[i_s] + integrate.cumulative_trapezoid(f, dx=grid.dt, axis=0, initial=0.0)
    return cur


def expansion_apply(op: ExpansionOperator, path: MultiLevelPath, drift: DriftSpec, s: float, t: float) -> np.ndarray:
    """``A^(k)_{s,t} phi`` as a d-vector."""
    return expansion_path(op, path, drift, s, t)[-1]
