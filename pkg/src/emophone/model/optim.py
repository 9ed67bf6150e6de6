"""Adam with global gradient-norm clipping."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


@dataclass
class AdamState:
    step: int = 0
    m: dict = field(default_factory=dict)
    v: dict = field(default_factory=dict)

    @classmethod
    def zeros(cls, params):
        return cls(
            0,
            {k: np.zeros_like(p) for k, p in params.items()},
            {k: np.zeros_like(p) for k, p in params.items()},
        )


def global_norm(grads):
    return float(np.sqrt(sum(float(np.sum(np.square(g, dtype=np.float64))) for g in grads.values())))


def clip_by_global_norm(grads, max_norm):
    """Scale ``grads`` in place so their joint L2 norm is at most ``max_norm``."""
    norm = global_norm(grads)
    if max_norm is not None and norm > max_norm:
        factor = max_norm / norm
        for g in grads.values():
            g *= g.dtype.type(factor)
    return norm


def adam_step(params, grads, state, lr=1e-3, beta1=0.9, beta2=0.999, eps=1e-8, clip_norm=5.0):
    """One in-place Adam update with bias correction; clipping is applied first."""
    clip_by_global_norm(grads, clip_norm)
    state.step += 1
    t = state.step
    c1 = 1.0 - beta1 ** t
    c2 = 1.0 - beta2 ** t
    for name, p in params.items():
        g = grads[name]
        m = state.m[name]
        v = state.v[name]
        m *= beta1
        m += (1.0 - beta1) * g
        v *= beta2
        v += (1.0 - beta2) * (g * g)
        p -= (lr / c1) * m / (np.sqrt(v / c2) + eps)
    return params, state
