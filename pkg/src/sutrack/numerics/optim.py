"""AdamW with decoupled weight decay and per-group learning rates."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .module import Parameter


@dataclass
class OptimState:
    lr: dict[str, float]
    betas: tuple[float, float] = (0.9, 0.999)
    eps: float = 1e-8
    weight_decay: float = 1e-4
    step: int = 0
    exp_avg: dict[str, np.ndarray] = field(default_factory=dict)
    exp_avg_sq: dict[str, np.ndarray] = field(default_factory=dict)


class AdamW:
    """AdamW over a fixed list of named parameters.

    The decay is applied to the parameter directly (``p -= lr * wd * p``)
    before the Adam step, independently of the gradient moments.
    """

    def __init__(
        self,
        params: list[Parameter],
        lr: dict[str, float] | float,
        betas: tuple[float, float] = (0.9, 0.999),
        eps: float = 1e-8,
        weight_decay: float = 1e-4,
    ):
        if isinstance(lr, (int, float)):
            lr = {"encoder": float(lr), "other": float(lr)}
        names = [p.name for p in params]
        if any(not n for n in names) or len(set(names)) != len(names):
            raise ValueError("optimizer needs uniquely named parameters")
        for p in params:
            if p.group not in lr:
                raise KeyError(f"no learning rate for group {p.group!r} ({p.name})")
        self.params = list(params)
        self.state = OptimState(dict(lr), tuple(betas), eps, weight_decay)
        for p in self.params:
            self.state.exp_avg[p.name] = np.zeros_like(p.data)
            self.state.exp_avg_sq[p.name] = np.zeros_like(p.data)

    def zero_grad(self) -> None:
        for p in self.params:
            p.grad = None

    def step(self) -> None:
        missing = [p.name for p in self.params if p.grad is None]
        if missing:
            raise RuntimeError(f"missing gradient for parameters: {', '.join(missing)}")
        st = self.state
        st.step += 1
        b1, b2 = st.betas
        c1 = 1.0 - b1**st.step
        c2 = 1.0 - b2**st.step
        for p in self.params:
            lr = st.lr[p.group]
            m = st.exp_avg[p.name]
            v = st.exp_avg_sq[p.name]
            g = p.grad
            m *= b1
            m += (1.0 - b1) * g
            v *= b2
            v += (1.0 - b2) * g * g
            if st.weight_decay:
                p.data = p.data * (1.0 - lr * st.weight_decay)
            p.data = p.data - lr * (m / c1) / (np.sqrt(v / c2) + st.eps)
