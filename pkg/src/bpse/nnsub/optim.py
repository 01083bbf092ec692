from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .tensor import Tensor


@dataclass
class AdamState:
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    step: int = 0
    m: dict[str, np.ndarray] = field(default_factory=dict)
    v: dict[str, np.ndarray] = field(default_factory=dict)


def adam_step(state: AdamState, params: dict[str, Tensor], grads: dict[str, np.ndarray] | None = None) -> AdamState:
    """One bias-corrected Adam update, in place on ``params``.

    ``grads`` defaults to each parameter's ``.grad``; a missing gradient counts as zero.
    """
    state.step += 1
    t = state.step
    c1 = 1.0 - state.beta1 ** t
    c2 = 1.0 - state.beta2 ** t
    for name in params:  # dict order fixes the reduction order
        p = params[name]
        g = grads[name] if grads is not None else p.grad
        if g is None:
            g = np.zeros_like(p.data)
        m = state.m.get(name)
        if m is None:
            m = state.m[name] = np.zeros_like(p.data)
            state.v[name] = np.zeros_like(p.data)
        v = state.v[name]
        m *= state.beta1
        m += (1.0 - state.beta1) * g
        v *= state.beta2
        v += (1.0 - state.beta2) * (g * g)
        p.data -= (state.lr * (m / c1) / (np.sqrt(v / c2) + state.eps)).astype(p.data.dtype)
    return state


class Adam:
    """Thin wrapper binding an :class:`AdamState` to a model's named parameters."""

    def __init__(self, named_params: dict[str, Tensor], lr: float = 1e-3, betas=(0.9, 0.999),
                 eps: float = 1e-8, clip_norm: float | None = None):
        self.params = named_params
        self.state = AdamState(lr=lr, beta1=betas[0], beta2=betas[1], eps=eps)
        self.clip_norm = clip_norm

    def zero_grad(self):
        for p in self.params.values():
            p.grad = None

    def grad_norm(self) -> float:
        total = 0.0
        for p in self.params.values():
            if p.grad is not None:
                total += float(np.sum(p.grad.astype(np.float64) ** 2))
        return total ** 0.5

    def step(self):
        grads = None
        if self.clip_norm is not None:
            norm = self.grad_norm()
            if norm > self.clip_norm:
                scale = self.clip_norm / norm
                grads = {k: (p.grad * scale if p.grad is not None else None) for k, p in self.params.items()}
        adam_step(self.state, self.params, grads)
