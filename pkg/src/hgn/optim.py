"""Adam optimizer with bias correction, plus global-norm gradient clipping."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .autodiff import Tensor
from .errors import ShapeError


@dataclass
class AdamState:
    """Per-parameter first/second moment estimates and hyperparameters."""

    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    step_count: int = 0
    m: np.ndarray | None = field(default=None, repr=False)
    v: np.ndarray | None = field(default=None, repr=False)


def adam_step(param: Tensor, state: AdamState) -> None:
    """One bias-corrected Adam update in place; reads param.grad."""
    if param.grad is None:
        raise ShapeError(f"adam_step: parameter {param.name!r} has no gradient")
    g = param.grad
    if state.m is None:
        state.m = np.zeros_like(param.data)
        state.v = np.zeros_like(param.data)
    state.step_count += 1
    state.m = state.beta1 * state.m + (1.0 - state.beta1) * g
    state.v = state.beta2 * state.v + (1.0 - state.beta2) * (g * g)
    m_hat = state.m / (1.0 - state.beta1**state.step_count)
    v_hat = state.v / (1.0 - state.beta2**state.step_count)
    param.data -= state.lr * m_hat / (np.sqrt(v_hat) + state.eps)


class Adam:
    """Adam over a list of parameters, with optional decoupled L2 on the grads."""

    def __init__(self, params: list[Tensor], lr: float = 1e-3, beta1: float = 0.9,
                 beta2: float = 0.999, eps: float = 1e-8, weight_decay: float = 0.0):
        self.params = list(params)
        self.weight_decay = float(weight_decay)
        self.states = [AdamState(lr=lr, beta1=beta1, beta2=beta2, eps=eps) for _ in self.params]

    @property
    def lr(self) -> float:
        return self.states[0].lr if self.states else 0.0

    def set_lr(self, lr: float) -> None:
        for s in self.states:
            s.lr = float(lr)

    def step(self) -> None:
        for p, s in zip(self.params, self.states):
            if self.weight_decay > 0.0 and p.grad is not None:
                p.grad += self.weight_decay * p.data
            adam_step(p, s)

    def zero_grad(self) -> None:
        for p in self.params:
            p.zero_grad()


def clip_global_norm(params: list[Tensor], max_norm: float) -> float:
    """Scale all gradients so their joint L2 norm is at most max_norm.

    Returns the pre-clip norm.  max_norm <= 0 disables clipping.
    """
    total = 0.0
    for p in params:
        if p.grad is not None:
            total += float((p.grad * p.grad).sum())
    norm = float(np.sqrt(total))
    if max_norm > 0.0 and norm > max_norm:
        factor = max_norm / norm
        for p in params:
            if p.grad is not None:
                p.grad *= factor
    return norm
