from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from ..errors import UnknownName
from ..rng import as_generator

BOX_RADIUS = 10.0


@dataclass(frozen=True, eq=False)
class DriftSpec:
    """Bounded Hölder drift ``b: R^d -> R^d``.

    ``certified_holder_bound`` bounds both ``sup |b|`` and the alpha-Hölder
    constant. ``evaluator`` acts on arrays of shape ``(..., d)``.
    """

    alpha: float
    evaluator: Callable[[np.ndarray], np.ndarray]
    certified_holder_bound: float
    name: str
    dim: int = 1

    def __post_init__(self):
        if not 0 < self.alpha <= 1:
            raise ValueError(f"alpha must lie in (0, 1], got {self.alpha}")

    def __call__(self, x) -> np.ndarray:
        return self.evaluator(np.asarray(x, dtype=float))

    def scaled(self, factor: float) -> "DriftSpec":
        f = self.evaluator
        return DriftSpec(self.alpha, lambda x: factor * f(x), abs(factor) * self.certified_holder_bound,
                         f"{factor:g}*{self.name}", self.dim)

    @property
    def is_zero(self) -> bool:
        return self.name == "zero"


def _clamp(x):
    return np.clip(x, -BOX_RADIUS, BOX_RADIUS)


def builtin_drift(name: str, alpha: float, dim: int = 1) -> DriftSpec:
    """Drift gallery clamped to the box ``[-10, 10]^d``.

    ``abs_pow``: ``1 - |x_i|^alpha``, kinked at 0. ``sign_pow``:
    ``sign(x_i)|x_i|^alpha``. ``smooth``: ``sin(x_i) + cos(x_{i+1})/2``,
    Lipschitz with constant 3/2.
    """
    if not 0 < alpha <= 1:
        raise ValueError(f"alpha must lie in (0, 1], got {alpha}")
    rd = BOX_RADIUS**alpha
    if name == "abs_pow":
        fn = lambda x: 1.0 - np.abs(_clamp(x)) ** alpha  # noqa: E731
        sup = np.sqrt(dim) * max(1.0, rd - 1.0)
        hold = dim ** ((1 - alpha) / 2)
    elif name == "sign_pow":
        fn = lambda x: np.sign(x) * np.abs(_clamp(x)) ** alpha  # noqa: E731
        sup = np.sqrt(dim) * rd
        hold = 2 ** (1 - alpha) * dim ** ((1 - alpha) / 2)
    elif name == "smooth":
        fn = lambda x: np.sin(x) + 0.5 * np.cos(np.roll(x, -1, axis=-1))  # noqa: E731
        sup = 1.5 * np.sqrt(dim)
        # min(L|x-y|, 2 sup) <= max(L, 2 sup) |x-y|^alpha
        hold = max(1.5, 2 * sup)
    elif name == "zero":
        return zero_drift(dim)
    else:
        raise UnknownName(f"unknown drift {name!r}; choose abs_pow, sign_pow, smooth or zero")
    return DriftSpec(alpha, fn, float(max(sup, hold)), name, dim)


def zero_drift(dim: int = 1) -> DriftSpec:
    return DriftSpec(1.0, np.zeros_like, 1e-300, "zero", dim)


def constant_drift(c, dim: int = 1) -> DriftSpec:
    c = np.broadcast_to(np.asarray(c, dtype=float), (dim,)).copy()
    bound = float(np.linalg.norm(c)) or 1e-300
    return DriftSpec(1.0, lambda x: np.broadcast_to(c, np.shape(x)).copy(), bound, "constant", dim)


def unit_holder(drift: DriftSpec) -> DriftSpec:
    """Rescale so that the certified C^alpha bound is at most 1."""
    return drift.scaled(1.0 / drift.certified_holder_bound)


def spot_check(drift: DriftSpec, n_pairs: int = 10_000, seed=0, spread: float = 12.0) -> dict:
    """Random-pair verification of the certified bound; returns the worst ratios."""
    rng = as_generator(seed)
    x = rng.uniform(-spread, spread, (n_pairs, drift.dim))
    # half of the pairs are close, where the Hölder quotient is largest
    scale = np.where(rng.uniform(size=(n_pairs, 1)) < 0.5, 1e-3, 1.0)
    y = x + scale * rng.standard_normal((n_pairs, drift.dim)) * 10 ** rng.uniform(-6, 1, (n_pairs, 1))
    bx, by = drift(x), drift(y)
    dist = np.linalg.norm(x - y, axis=1)
    ok = dist > 0
    quotient = np.linalg.norm(bx - by, axis=1)[ok] / dist[ok] ** drift.alpha
    sup = max(np.linalg.norm(bx, axis=1).max(), np.linalg.norm(by, axis=1).max())
    bound = drift.certified_holder_bound
    return {
        "holder_ratio": float(quotient.max() / bound),
        "sup_ratio": float(sup / bound),
        "passed": bool(quotient.max() <= bound * (1 + 1e-12) and sup <= bound * (1 + 1e-12)),
    }
