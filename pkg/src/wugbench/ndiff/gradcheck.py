"""Finite-difference verification of analytic gradients."""

from __future__ import annotations

from typing import Callable

import numpy as np

from .tensor import ContractError, Tensor, backward, no_grad


def grad_check(f: Callable[[Tensor], Tensor], x, h: float = 1e-5) -> float:
    """Max elementwise relative error between analytic and central-difference
    gradients of the scalar function ``f`` at ``x``.

    Error per element is |a - n| / max(|a|, |n|, 1e-8), which stays finite
    when both gradients vanish.
    """
    x0 = np.array(x, dtype=np.float64)
    leaf = Tensor(x0.copy(), requires_grad=True)
    out = f(leaf)
    if out.shape != ():
        raise ContractError(f"grad_check: f must return a scalar, got shape {out.shape}")
    backward(out)
    analytic = np.zeros_like(x0) if leaf.grad is None else leaf.grad

    numeric = np.zeros_like(x0)
    flat = numeric.reshape(-1)
    with no_grad():
        for i in range(x0.size):
            xp = x0.copy()
            xp.flat[i] += h
            xm = x0.copy()
            xm.flat[i] -= h
            flat[i] = (f(Tensor(xp)).item() - f(Tensor(xm)).item()) / (2.0 * h)

    denom = np.maximum(np.maximum(np.abs(analytic), np.abs(numeric)), 1e-8)
    return float(np.max(np.abs(analytic - numeric) / denom))
