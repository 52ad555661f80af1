"""Plain pre-norm transformer encoder with global self-attention."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .numerics import MLP, F, LayerNorm, Linear, Module, Tensor

GROUP = "encoder"


@dataclass
class EncoderConfig:
    depth: int = 2
    dim: int = 64
    heads: int = 4
    mlp_ratio: float = 4.0

    def __post_init__(self):
        if self.dim % self.heads:
            raise ValueError(f"width {self.dim} is not divisible by {self.heads} heads")
        if self.depth < 0:
            raise ValueError("depth must be non-negative")


class Attention(Module):
    def __init__(self, rng: np.random.Generator, dim: int, heads: int):
        self.heads = heads
        self.qkv = Linear(rng, dim, 3 * dim, GROUP)
        self.proj = Linear(rng, dim, dim, GROUP)

    def __call__(self, x: Tensor) -> Tensor:
        *lead, n, d = x.shape
        h = self.heads
        dh = d // h
        qkv = F.reshape(self.qkv(x), (*lead, n, 3, h, dh))
        k_ = len(lead)
        # (3, ..., h, n, dh)
        qkv = F.transpose(qkv, (k_ + 1, *range(k_), k_ + 2, k_, k_ + 3))
        q, k, v = qkv[0], qkv[1], qkv[2]
        attn = F.softmax(F.matmul(q, F.transpose(k)) * (1.0 / math.sqrt(dh)))
        out = F.matmul(attn, v)  # (..., h, n, dh)
        out = F.transpose(out, (*range(k_), k_ + 1, k_, k_ + 2))
        return self.proj(F.reshape(out, (*lead, n, d)))


class Block(Module):
    def __init__(self, rng: np.random.Generator, cfg: EncoderConfig):
        self.norm1 = LayerNorm(cfg.dim, GROUP)
        self.attn = Attention(rng, cfg.dim, cfg.heads)
        self.norm2 = LayerNorm(cfg.dim, GROUP)
        self.mlp = MLP(rng, [cfg.dim, int(cfg.dim * cfg.mlp_ratio), cfg.dim], GROUP)

    def __call__(self, x: Tensor) -> Tensor:
        x = x + self.attn(self.norm1(x))
        return x + self.mlp(self.norm2(x))


class Encoder(Module):
    """``depth`` residual blocks followed by a final layer norm.

    ``depth=0`` is allowed and reduces the encoder to the final norm.
    """

    def __init__(self, rng: np.random.Generator, cfg: EncoderConfig):
        self.cfg = cfg
        self.blocks = [Block(rng, cfg) for _ in range(cfg.depth)]
        self.norm = LayerNorm(cfg.dim, GROUP)

    def __call__(self, x: Tensor) -> Tensor:
        if x.shape[-1] != self.cfg.dim:
            raise ValueError(f"token width {x.shape[-1]} != encoder width {self.cfg.dim}")
        for blk in self.blocks:
            x = blk(x)
        return self.norm(x)


def encode(seq, encoder: Encoder):
    """Run the encoder over a ``TokenSequence``; spans are unchanged."""
    return seq.with_tokens(encoder(seq.tokens))
