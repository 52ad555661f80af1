"""Parameters and a small module tree for naming and collecting them."""
from __future__ import annotations

from typing import Iterator

import numpy as np

from .tensor import Tensor, gelu, layer_norm, matmul

GROUPS = ("encoder", "other")


class Parameter(Tensor):
    """A trainable leaf tensor tagged with an optimizer group.

    The group decides which learning rate the optimizer applies and cannot be
    changed after construction.  ``name`` is filled in when the owning module
    tree is walked.
    """

    __slots__ = ("_group", "name")

    def __init__(self, data, group: str = "other"):
        if group not in GROUPS:
            raise ValueError(f"unknown parameter group {group!r}; expected one of {GROUPS}")
        super().__init__(data, requires_grad=True)
        self._group = group
        self.name = ""

    @property
    def group(self) -> str:
        return self._group


class Module:
    """Base class; parameters are discovered from attributes in insertion order."""

    def named_parameters(self, prefix: str = "") -> Iterator[tuple[str, Parameter]]:
        for attr, value in vars(self).items():
            path = f"{prefix}{attr}"
            if isinstance(value, Parameter):
                yield path, value
            elif isinstance(value, Module):
                yield from value.named_parameters(path + ".")
            elif isinstance(value, (list, tuple)):
                for i, item in enumerate(value):
                    if isinstance(item, Module):
                        yield from item.named_parameters(f"{path}.{i}.")
                    elif isinstance(item, Parameter):
                        yield f"{path}.{i}", item

    def parameters(self) -> list[Parameter]:
        return [p for _, p in self.named_parameters()]

    def assign_names(self) -> None:
        """Write dotted attribute paths into ``Parameter.name`` and check uniqueness."""
        seen: dict[int, str] = {}
        for name, p in self.named_parameters():
            if id(p) in seen:
                raise ValueError(f"parameter shared between {seen[id(p)]} and {name}")
            seen[id(p)] = name
            p.name = name

    def zero_grad(self) -> None:
        for p in self.parameters():
            p.grad = None

    def state_dict(self) -> dict[str, np.ndarray]:
        return {name: p.data.copy() for name, p in self.named_parameters()}

    def load_state_dict(self, state: dict[str, np.ndarray]) -> None:
        own = dict(self.named_parameters())
        missing = sorted(set(own) - set(state))
        unexpected = sorted(set(state) - set(own))
        if missing or unexpected:
            raise KeyError(f"state mismatch: missing {missing}, unexpected {unexpected}")
        for name, p in own.items():
            value = np.asarray(state[name], dtype=np.float64)
            if value.shape != p.shape:
                raise ValueError(f"{name}: checkpoint shape {value.shape} != model shape {p.shape}")
            p.data = value.copy()


def uniform_init(rng: np.random.Generator, shape, fan_in: int) -> np.ndarray:
    bound = 1.0 / np.sqrt(fan_in)
    return rng.uniform(-bound, bound, size=shape)


class Linear(Module):
    """``y = x W^T + b`` with ``W`` stored as (out, in)."""

    def __init__(self, rng: np.random.Generator, d_in: int, d_out: int, group: str = "other"):
        self.weight = Parameter(uniform_init(rng, (d_out, d_in), d_in), group)
        self.bias = Parameter(np.zeros(d_out), group)

    def __call__(self, x: Tensor) -> Tensor:
        return matmul(x, self.weight.T) + self.bias


class LayerNorm(Module):
    def __init__(self, dim: int, group: str = "other", eps: float = 1e-5):
        self.weight = Parameter(np.ones(dim), group)
        self.bias = Parameter(np.zeros(dim), group)
        self.eps = eps

    def __call__(self, x: Tensor) -> Tensor:
        return layer_norm(x, self.weight, self.bias, self.eps)


class MLP(Module):
    """Affine layers separated by GELU."""

    def __init__(self, rng: np.random.Generator, widths: list[int], group: str = "other"):
        self.layers = [Linear(rng, a, b, group) for a, b in zip(widths[:-1], widths[1:])]

    def __call__(self, x: Tensor) -> Tensor:
        for i, layer in enumerate(self.layers):
            x = layer(x)
            if i < len(self.layers) - 1:
                x = gelu(x)
        return x
