"""Finite-difference verification of analytic gradients.

The loss function is re-evaluated with each parameter coordinate nudged by
+-h (central differences) and compared against the gradients produced by one
backward pass.  The relative error denominator is floored at unit scale so
float64 roundoff on near-zero coordinates does not drown the comparison; the
raw max absolute error is reported alongside.
"""

from __future__ import annotations

from collections.abc import Mapping
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .autodiff import Tensor


@dataclass
class GradCheckReport:
    max_rel_err: float
    max_abs_err: float
    tol: float
    per_param: dict[str, float]
    checked: int

    @property
    def passed(self) -> bool:
        return self.max_rel_err <= self.tol


def finite_diff_check(
    loss_fn: Callable[[], Tensor],
    params,
    h: float = 1e-4,
    tol: float = 1e-4,
) -> GradCheckReport:
    """Compare analytic gradients of loss_fn against central differences.

    loss_fn rebuilds the graph on every call and returns a scalar Tensor.
    params is a sequence of Tensors or a name -> Tensor mapping.
    """
    if isinstance(params, Mapping):
        named = list(params.items())
    else:
        named = [(p.name or f"param{i}", p) for i, p in enumerate(params)]
    tensors = [p for _, p in named]
    for p in tensors:
        p.zero_grad()
    loss = loss_fn()
    loss.backward()
    analytic = [np.zeros_like(p.data) if p.grad is None else p.grad.copy() for p in tensors]
    for p in tensors:
        p.zero_grad()

    max_rel = 0.0
    max_abs = 0.0
    per_param: dict[str, float] = {}
    checked = 0
    for (label, p), a in zip(named, analytic):
        worst = 0.0
        flat = p.data.reshape(-1)
        aflat = a.reshape(-1)
        for i in range(flat.size):
            keep = flat[i]
            flat[i] = keep + h
            up = loss_fn().item()
            flat[i] = keep - h
            down = loss_fn().item()
            flat[i] = keep
            numeric = (up - down) / (2.0 * h)
            diff = abs(aflat[i] - numeric)
            rel = diff / max(abs(aflat[i]), abs(numeric), 1.0)
            worst = max(worst, rel)
            max_abs = max(max_abs, diff)
            checked += 1
        per_param[label] = worst
        max_rel = max(max_rel, worst)
    return GradCheckReport(max_rel_err=max_rel, max_abs_err=max_abs, tol=tol,
                           per_param=per_param, checked=checked)
