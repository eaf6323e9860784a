"""Picard map, Euler system scheme, conditional expansions and condition predicates."""

import json

from .conditions import (
    NOISE_SMOOTHER_THRESHOLD,
    choose_epsilon,
    gamma_recursion,
    noise_smoother_regime,
    strong_condition,
    strong_condition_rewritten,
    weak_condition,
)
from .drift import DriftSpec, builtin_drift, constant_drift, spot_check, unit_holder, zero_drift
from .euler import SolutionPath, euler_system_solve
from .expansion import ExpansionOperator, expansion_apply, expansion_path, noise_taylor
from .picard import (
    PicardState,
    SolverConfig,
    apply_T_K,
    half_holder,
    initial_state,
    picard_chain,
    picard_solve,
    picard_step,
)


def picard_state_json(state: PicardState) -> str:
    payload = {
        "iteration_index": state.k,
        "distance_history": [dict(sorted(d.items())) for d in state.distance_history],
        "meta": {k: v for k, v in sorted(state.meta.items())},
    }
    return json.dumps(payload, sort_keys=True, allow_nan=False, indent=2) + "\n"
