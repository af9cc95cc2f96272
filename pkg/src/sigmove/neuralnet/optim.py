from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .network import Params

BETA1 = 0.9
BETA2 = 0.999
EPSILON = 1e-8


@dataclass
class AdamState:
    m: dict[str, np.ndarray] = field(default_factory=dict)
    v: dict[str, np.ndarray] = field(default_factory=dict)
    step: int = 0


def adam_step(params: Params, grads: dict[str, np.ndarray], state: AdamState,
              lr: float = 1e-3) -> tuple[Params, AdamState]:
    """One bias-corrected Adam update. Inputs are left untouched."""
    t = state.step + 1
    bc1 = 1.0 - BETA1 ** t
    bc2 = 1.0 - BETA2 ** t
    new_params, new_m, new_v = {}, {}, {}
    for name, w in params.arrays.items():
        g = grads[name]
        if g.shape != w.shape:
            raise ValueError(f"gradient {name} has shape {g.shape}, parameter {w.shape}")
        m = state.m.get(name)
        v = state.v.get(name)
        m = (1.0 - BETA1) * g if m is None else BETA1 * m + (1.0 - BETA1) * g
        v = (1.0 - BETA2) * (g * g) if v is None else BETA2 * v + (1.0 - BETA2) * (g * g)
        new_params[name] = w - lr * (m / bc1) / (np.sqrt(v / bc2) + EPSILON)
        new_m[name], new_v[name] = m, v
    return Params(new_params, params.seed), AdamState(new_m, new_v, t)
