"""Finite-difference verification of backward passes."""

from __future__ import annotations

from typing import Callable

import numpy as np

from vulnscan.numcore.tensor import Tensor, backward, no_grad


def numeric_grad(f: Callable[[Tensor], Tensor], x: Tensor, eps: float = 1e-5) -> np.ndarray:
    grad = np.zeros_like(x.data)
    flat = x.data.reshape(-1)
    gflat = grad.reshape(-1)
    with no_grad():
        for k in range(flat.size):
            orig = flat[k]
            flat[k] = orig + eps
            hi = f(x).item()
            flat[k] = orig - eps
            lo = f(x).item()
            flat[k] = orig
            gflat[k] = (hi - lo) / (2 * eps)
    return grad


def grad_check(f: Callable[[Tensor], Tensor], x: Tensor, eps: float = 1e-5) -> float:
    """Max relative error between backward and central-difference gradients.

    Relative error per coordinate is |a - n| / max(|a|, |n|, 1e-8).
    """
    x.requires_grad = True
    x.grad = None
    backward(f(x))
    analytic = np.zeros_like(x.data) if x.grad is None else x.grad.copy()
    x.grad = None
    numeric = numeric_grad(f, x, eps)
    denom = np.maximum(np.maximum(np.abs(analytic), np.abs(numeric)), 1e-8)
    return float(np.max(np.abs(analytic - numeric) / denom)) if analytic.size else 0.0
