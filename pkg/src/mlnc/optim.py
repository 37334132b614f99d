from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .tensor import Param


@dataclass
class AdamState:
    """Adam with bias correction. No weight decay."""

    params: list[Param]
    lr: float = 0.01
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    t: int = 0
    m: dict = field(default_factory=dict)
    v: dict = field(default_factory=dict)

    def __post_init__(self):
        for p in self.params:
            self.m[p.name] = np.zeros_like(p.value)
            self.v[p.name] = np.zeros_like(p.value)


def adam_step(state: AdamState) -> None:
    missing = [p.name for p in state.params if p.grad is None]
    if missing:
        raise RuntimeError(f"adam_step before backward: no gradient for {missing[:3]}")
    state.t += 1
    b1, b2 = state.beta1, state.beta2
    c1 = 1.0 - b1 ** state.t
    c2 = 1.0 - b2 ** state.t
    for p in state.params:
        m = state.m[p.name]
        v = state.v[p.name]
        m *= b1
        m += (1 - b1) * p.grad
        v *= b2
        v += (1 - b2) * p.grad * p.grad
        p.value -= state.lr * (m / c1) / (np.sqrt(v / c2) + state.eps)
