"""Decoupled-weight-decay Adam."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .tensor import Tensor


@dataclass
class AdamWState:
    lr: float = 1e-3
    weight_decay: float = 0.01
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    step: int = 0
    m: dict[str, np.ndarray] = field(default_factory=dict)
    v: dict[str, np.ndarray] = field(default_factory=dict)


class AdamW:
    """AdamW over a ``{name: Tensor}`` mapping.

    Names in ``frozen`` are never touched: no moment buffers, no decay.
    """

    def __init__(self, params: dict[str, Tensor], lr: float = 1e-3, weight_decay: float = 0.01,
                 betas=(0.9, 0.999), eps: float = 1e-8, frozen=()):
        self.params = params
        self.frozen = set(frozen)
        self.state = AdamWState(lr=lr, weight_decay=weight_decay, beta1=betas[0], beta2=betas[1], eps=eps)
        for name, p in params.items():
            if name not in self.frozen:
                self.state.m[name] = np.zeros_like(p.data)
                self.state.v[name] = np.zeros_like(p.data)

    def zero_grad(self) -> None:
        for p in self.params.values():
            p.zero_grad()

    def step(self) -> None:
        st = self.state
        st.step += 1
        t = st.step
        bc1 = 1.0 - st.beta1**t
        bc2 = 1.0 - st.beta2**t
        for name, p in self.params.items():
            if name in self.frozen:
                continue
            g = p.grad
            m, v = st.m[name], st.v[name]
            m *= st.beta1
            m += (1.0 - st.beta1) * g
            v *= st.beta2
            v += (1.0 - st.beta2) * g * g
            # decay acts on the parameter directly, not through the gradient
            p.data *= 1.0 - st.lr * st.weight_decay
            p.data -= st.lr * (m / bc1) / (np.sqrt(v / bc2) + st.eps)


def adamw_step(state: AdamWState, params: dict[str, Tensor], frozen=()) -> None:
    """Functional form of :meth:`AdamW.step` on an explicit state."""
    opt = AdamW.__new__(AdamW)
    opt.params = params
    opt.frozen = set(frozen)
    opt.state = state
    for name, p in params.items():
        if name not in opt.frozen and name not in state.m:
            state.m[name] = np.zeros_like(p.data)
            state.v[name] = np.zeros_like(p.data)
    opt.step()
