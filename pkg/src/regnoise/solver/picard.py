"""The stopped Picard map ``phi -> int_0^t b(phi_{r ∧ tau_K} + B^H_r) dr`` and its iteration."""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np
from scipy import integrate

from ..errors import MaxItersExceeded
from ..noise.holder import _seminorm_of, stopping_index
from ..noise.types import MultiLevelPath
from .conditions import choose_epsilon, strong_condition
from .drift import DriftSpec


@dataclass(frozen=True)
class SolverConfig:
    K: float = 5.0
    eps: float = 0.25
    tol: Optional[float] = None
    max_iters: int = 60
    p_moment: int = 2

    def __post_init__(self):
        if self.K < 0:
            raise ValueError(f"K must be non-negative, got {self.K}")
        if self.eps <= 0:
            raise ValueError(f"eps must be positive, got {self.eps}")
        if self.tol is not None and self.tol <= 0:
            raise ValueError(f"tol must be positive, got {self.tol}")
        if self.max_iters < 1:
            raise ValueError("max_iters must be at least 1")
        if self.p_moment < 2 or self.p_moment % 2:
            raise ValueError(f"p_moment must be an even integer >= 2, got {self.p_moment}")

    @classmethod
    def for_problem(cls, h, alpha: float, **kw) -> "SolverConfig":
        """Config whose eps is the admissible choice when the strong condition holds."""
        if "eps" not in kw:
            H = getattr(h, "value", h)
            kw["eps"] = choose_epsilon(H, alpha) if strong_condition(H, alpha) else 0.25 * H
        return cls(**kw)

    def tolerance(self, drift: DriftSpec) -> float:
        return self.tol if self.tol is not None else 1e-8 * (1.0 + drift.certified_holder_bound)


@dataclass(frozen=True, eq=False)
class PicardState:
    phi: np.ndarray
    k: int = 0
    distance_history: tuple = ()
    meta: dict = field(default_factory=dict)

    @property
    def iteration_index(self) -> int:
        return self.k

    def geometric_ratio(self, window: int = 5, key: str = "sup") -> float:
        """Geometric mean of successive distance ratios over the last ``window`` iterations."""
        d = np.array([h[key] for h in self.distance_history], dtype=float)
        ratios = []
        for a, b in zip(d[:-1], d[1:]):
            if a > 0 and b > 0:
                ratios.append(b / a)
        ratios = ratios[-window:]
        if not ratios:
            return 0.0
        return float(math.exp(np.mean(np.log(ratios))))


def half_holder(diff: np.ndarray, dt: float) -> float:
    """Grid 1/2-Hölder seminorm of a path difference."""
    return _seminorm_of(np.asarray(diff, dtype=float), 0.5, dt)[0]


def initial_state(path: MultiLevelPath, init="zero") -> PicardState:
    """Members of S^0: the zero path, the linear path ``t -> t(1,...,1)`` or a custom array."""
    shape = path.top.shape
    if isinstance(init, str):
        if init == "zero":
            phi = np.zeros(shape)
        elif init == "linear":
            phi = np.repeat((path.grid.points - path.grid.start)[:, None], shape[1], axis=1)
        else:
            raise ValueError(f"unknown initialisation {init!r}")
    else:
        phi = np.array(init, dtype=float).reshape(shape)
        phi = phi - phi[0]
    return PicardState(phi, 0, (), {"init": init if isinstance(init, str) else "custom"})


def apply_T_K(phi: np.ndarray, path: MultiLevelPath, drift: DriftSpec, tau_idx: int) -> np.ndarray:
    """One application of the stopped map; ``phi`` is frozen after grid index ``tau_idx``."""
    n = phi.shape[0]
    frozen = phi[np.minimum(np.arange(n), tau_idx)]
    if drift.is_zero:
        return np.zeros_like(phi)
    f = drift(frozen + path.top)
    return integrate.cumulative_trapezoid(f, dx=path.grid.dt, axis=0, initial=0.0)


def picard_step(state: PicardState, path: MultiLevelPath, drift: DriftSpec, cfg: SolverConfig,
                tau_idx: Optional[int] = None) -> PicardState:
    if state.phi.shape != path.top.shape:
        raise ValueError("phi and path live on different grids")
    if tau_idx is None:
        tau_idx = stopping_index(path, cfg.K, cfg.eps)
    new = apply_T_K(state.phi, path, drift, tau_idx)
    diff = new - state.phi
    dist = {
        "sup": float(np.max(np.abs(diff))) if diff.size else 0.0,
        "half_holder": half_holder(diff, path.grid.dt),
    }
    meta = dict(state.meta, tau_index=int(tau_idx))
    return PicardState(new, state.k + 1, state.distance_history + (dist,), meta)


def picard_chain(path: MultiLevelPath, drift: DriftSpec, cfg: SolverConfig, depth: int,
                 init="zero", tau_idx: Optional[int] = None) -> list[PicardState]:
    """``[psi, T_K psi, ..., T_K^depth psi]`` starting from ``init``."""
    if tau_idx is None:
        tau_idx = stopping_index(path, cfg.K, cfg.eps)
    chain = [initial_state(path, init)]
    for _ in range(depth):
        chain.append(picard_step(chain[-1], path, drift, cfg, tau_idx))
    return chain


def picard_solve(path: MultiLevelPath, drift: DriftSpec, cfg: SolverConfig, init="zero",
                 tau_idx: Optional[int] = None) -> PicardState:
    """Iterate the stopped map until successive iterates agree to ``tol`` in sup norm."""
    if tau_idx is None:
        tau_idx = stopping_index(path, cfg.K, cfg.eps)
    tol = cfg.tolerance(drift)
    state = initial_state(path, init)
    for _ in range(cfg.max_iters):
        state = picard_step(state, path, drift, cfg, tau_idx)
        if state.distance_history[-1]["sup"] < tol:
            return replace(state, meta=dict(state.meta, converged=True,
                                            geometric_ratio=state.geometric_ratio()))
    raise MaxItersExceeded(
        f"no convergence to {tol:g} after {cfg.max_iters} Picard steps",
        replace(state, meta=dict(state.meta, converged=False)),
    )
