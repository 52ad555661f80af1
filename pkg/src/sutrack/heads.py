"""Center-based box head and the task-recognition head."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .embedding import NUM_TASKS, TokenSequence
from .numerics import MLP, F, Module, Tensor

POOLING_MODES = ("mean_pool", "text_token", "extra_task_token")


@dataclass
class HeadOutput:
    """Maps over the S x S search grid (a leading batch axis is allowed).

    score: foreground probability; offset: (x, y) position of the box center
    inside its cell, in cells; size: (w, h) as a fraction of the search side.
    """

    score: Tensor
    offset: Tensor
    size: Tensor

    @property
    def grid(self) -> int:
        return self.score.shape[-1]


class TrackHead(Module):
    """Three per-token MLP branches; there is no mixing between grid cells."""

    def __init__(self, rng: np.random.Generator, dim: int, hidden: int):
        self.score = MLP(rng, [dim, hidden, 1])
        self.offset = MLP(rng, [dim, hidden, 2])
        self.size = MLP(rng, [dim, hidden, 2])

    def __call__(self, tokens: Tensor) -> HeadOutput:
        *lead, n, _ = tokens.shape
        s = math.isqrt(n)
        if s * s != n:
            raise ValueError(f"search span of {n} tokens is not a square grid")
        score = F.sigmoid(F.reshape(self.score(tokens), (*lead, s, s)))
        offset = F.sigmoid(F.reshape(self.offset(tokens), (*lead, s, s, 2)))
        size = F.sigmoid(F.reshape(self.size(tokens), (*lead, s, s, 2)))
        return HeadOutput(score, offset, size)


def track_head(search_tokens: Tensor, head: TrackHead) -> HeadOutput:
    return head(search_tokens)


class TaskHead(Module):
    """Three affine layers (two GELUs) mapping a pooled token to task logits."""

    def __init__(self, rng: np.random.Generator, dim: int, hidden: int = 32):
        self.mlp = MLP(rng, [dim, hidden, hidden, NUM_TASKS])

    def __call__(self, pooled: Tensor) -> Tensor:
        return self.mlp(pooled)


def pool_tokens(seq: TokenSequence, mode: str = "mean_pool") -> Tensor:
    """Reduce output tokens to one vector per sample for task recognition."""
    if mode == "mean_pool":
        return F.mean(seq.tokens, axis=-2)
    if mode == "text_token":
        if "text" not in seq.spans:
            raise ValueError("text_token pooling needs the text token in the sequence")
        lo, _ = seq.spans["text"]
        return seq.tokens[..., lo, :]
    if mode == "extra_task_token":
        if "task" not in seq.spans:
            raise ValueError("extra_task_token pooling needs a task token in the sequence")
        lo, _ = seq.spans["task"]
        return seq.tokens[..., lo, :]
    raise ValueError(f"unknown pooling mode {mode!r}")


def task_logits(tokens: Tensor, head: TaskHead) -> Tensor:
    """Mean over all N output tokens followed by the task MLP."""
    return head(F.mean(tokens, axis=-2))
