"""Central finite differences, used as an independent check on the tape."""
from __future__ import annotations

from typing import Callable, Sequence

import numpy as np

from .tensor import Tensor, no_grad


def numerical_grad(
    fn: Callable[..., Tensor], inputs: Sequence[np.ndarray], h: float = 1e-5
) -> list[np.ndarray]:
    """d fn / d input for each array in ``inputs`` by central differences."""
    arrays = [np.array(x, dtype=np.float64) for x in inputs]
    grads = []
    with no_grad():
        for k, x in enumerate(arrays):
            g = np.zeros_like(x)
            flat = x.reshape(-1)
            gflat = g.reshape(-1)
            for i in range(flat.size):
                orig = flat[i]
                flat[i] = orig + h
                fp = fn(*[Tensor(a) for a in arrays]).item()
                flat[i] = orig - h
                fm = fn(*[Tensor(a) for a in arrays]).item()
                flat[i] = orig
                gflat[i] = (fp - fm) / (2 * h)
            grads.append(g)
    return grads


def analytic_grad(fn: Callable[..., Tensor], inputs: Sequence[np.ndarray]) -> list[np.ndarray]:
    leaves = [Tensor(np.array(x, dtype=np.float64), requires_grad=True) for x in inputs]
    fn(*leaves).backward()
    return [np.zeros_like(t.data) if t.grad is None else t.grad for t in leaves]


def gradcheck(
    fn: Callable[..., Tensor],
    inputs: Sequence[np.ndarray],
    h: float = 1e-5,
    rtol: float = 1e-4,
    atol: float = 1e-6,
) -> tuple[bool, float]:
    """Compare tape and finite-difference gradients of a scalar function.

    Returns ``(ok, worst)`` where ``worst`` is the largest violation ratio
    ``|a - n| / (atol + rtol * |n|)``; ``ok`` means every entry is below 1.
    """
    ana = analytic_grad(fn, inputs)
    num = numerical_grad(fn, inputs, h)
    worst = 0.0
    for a, n in zip(ana, num):
        ratio = np.abs(a - n) / (atol + rtol * np.abs(n))
        worst = max(worst, float(ratio.max()))
    return worst <= 1.0, worst
