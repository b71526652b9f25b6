"""AdamW with decoupled weight decay."""

from dataclasses import dataclass, field

import numpy as np


@dataclass
class AdamState:
    m: dict = field(default_factory=dict)
    v: dict = field(default_factory=dict)
    step: int = 0


def adamw_step(params, grads, state, lr, beta1=0.9, beta2=0.999, eps=1e-8, weight_decay=0.05,
               no_decay=()):
    """One bias-corrected AdamW update. Inputs are not modified.

    Tensors named in ``no_decay`` skip the weight-decay term.
    """
    t = state.step + 1
    c1 = 1.0 - beta1**t
    c2 = 1.0 - beta2**t
    new_params, m_out, v_out = {}, {}, {}
    for name, p in params.items():
        g = grads[name]
        m = beta1 * state.m.get(name, 0.0) + (1.0 - beta1) * g
        v = beta2 * state.v.get(name, 0.0) + (1.0 - beta2) * g * g
        update = (m / c1) / (np.sqrt(v / c2) + eps)
        wd = 0.0 if name in no_decay else weight_decay
        new_params[name] = p - lr * (update + wd * p)
        m_out[name], v_out[name] = m, v
    return new_params, AdamState(m_out, v_out, t)
