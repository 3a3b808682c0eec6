"""Adam optimizer and gradient clipping over named parameter collections."""

from __future__ import annotations

import math
from typing import Mapping

import numpy as np

from .tensor import Tensor


class Adam:
    """Adam with bias-corrected moment estimates.

    Parameters are a name -> Tensor mapping; moments are keyed by name so
    the update order never depends on dict iteration quirks.
    """

    def __init__(self, params: Mapping[str, Tensor], lr: float = 1e-3,
                 beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8):
        self.params = dict(params)
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.t = 0
        self.m = {name: np.zeros_like(p.data) for name, p in self.params.items()}
        self.v = {name: np.zeros_like(p.data) for name, p in self.params.items()}

    def step(self) -> None:
        """Apply one update from the gradients currently stored on params."""
        self.t += 1
        bc1 = 1.0 - self.beta1 ** self.t
        bc2 = 1.0 - self.beta2 ** self.t
        for name in sorted(self.params):
            p = self.params[name]
            if p.grad is None:
                continue
            g = p.grad
            m = self.m[name]
            v = self.v[name]
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            v *= self.beta2
            v += (1.0 - self.beta2) * g * g
            p.data -= self.lr * (m / bc1) / (np.sqrt(v / bc2) + self.eps)

    def zero_grad(self) -> None:
        for p in self.params.values():
            p.grad = None


def global_grad_norm(params: Mapping[str, Tensor]) -> float:
    """L2 norm of all gradients concatenated."""
    total = 0.0
    for p in params.values():
        if p.grad is not None:
            total += float(np.sum(p.grad * p.grad))
    return math.sqrt(total)


def clip_global_norm(params: Mapping[str, Tensor], max_norm: float) -> float:
    """Rescale gradients in place so their joint L2 norm is <= max_norm.

    Returns the pre-clip norm so callers can log or NaN-check it.
    """
    norm = global_grad_norm(params)
    if norm > max_norm and norm > 0.0:
        scale = max_norm / norm
        for p in params.values():
            if p.grad is not None:
                p.grad *= scale
    return norm
