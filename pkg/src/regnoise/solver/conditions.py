"""Admissibility predicates and the exponents derived from them."""

from __future__ import annotations

import math

from ..errors import ConditionViolated, NonPositive, NonTerminating
from ..noise.types import Hurst

NOISE_SMOOTHER_THRESHOLD = 1.0 + 1.0 / math.sqrt(2.0)
MAX_GAMMA_STEPS = 10_000


def _h(h) -> float:
    # Integer H is meaningful for the algebra even though no noise exists there.
    v = h.value if isinstance(h, Hurst) else float(h)
    if not v > 0:
        raise NonPositive(f"Hurst parameter must be positive, got {v}")
    return v


def strong_condition(h, alpha: float) -> bool:
    """``alpha > 1 - 1/(2H)``."""
    return alpha > 1.0 - 1.0 / (2.0 * _h(h))


def strong_condition_rewritten(h, alpha: float) -> bool:
    """Same condition in the form ``1 + H alpha - H > 1/2``."""
    H = _h(h)
    return 1.0 + H * alpha - H > 0.5


def weak_condition(h, alpha: float) -> bool:
    """``alpha > 1 - 1/H``: drift parts of high Picard iterates beat the noise regularity."""
    return alpha > 1.0 - 1.0 / _h(h)


def noise_smoother_regime(h) -> bool:
    """Whether the noise can be more regular than the drift component at the strong threshold."""
    return _h(h) > NOISE_SMOOTHER_THRESHOLD


def choose_epsilon(h, alpha: float) -> float:
    """Half the supremum of admissible eps in ``2(1 + H alpha - H) - eps alpha > 1``, capped at H/2."""
    H = _h(h)
    if not strong_condition(H, alpha):
        raise ConditionViolated(f"alpha={alpha} does not exceed 1 - 1/(2H) = {1 - 1 / (2 * H)}")
    sup = (2.0 * (1.0 + H * alpha - H) - 1.0) / alpha
    return min(0.5 * sup, 0.5 * H)


def gamma_recursion(alpha: float, h, eps: float) -> tuple[list[float], int, float]:
    """Exponents ``gamma_k = 1 + alpha min(gamma_{k-1}, H - eps)`` from ``gamma_0 = 1``.

    Returns ``(gammas, k0, gamma_k0)`` where ``gammas`` runs up to ``k0 - 1``,
    ``k0 = inf{l : gamma_l > H - eps} + 1`` and ``gamma_k0 = 1 + alpha (H - eps)``.
    """
    H = _h(h)
    if not 0 < alpha <= 1:
        raise ValueError(f"alpha must lie in (0, 1], got {alpha}")
    cap = H - eps
    gammas = [1.0]
    while gammas[-1] <= cap:
        if len(gammas) > MAX_GAMMA_STEPS:
            raise NonTerminating(
                f"gamma_k never exceeds H - eps = {cap} for alpha={alpha}; weak condition fails"
            )
        gammas.append(1.0 + alpha * min(gammas[-1], cap))
    k0 = len(gammas)
    return gammas, k0, 1.0 + alpha * cap
