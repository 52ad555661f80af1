"""Drawing training pairs from a pool of sequences with a task mix."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..embedding import ModalFrame, Task
from .synthetic import SyntheticSequence


def _default_weights() -> dict[Task, float]:
    # RGB drawn at twice the rate of each multi-modal task
    return {Task.RGB: 2.0, Task.RGBD: 1.0, Task.RGBT: 1.0, Task.RGBE: 1.0, Task.RGBL: 1.0}


@dataclass
class SampleMix:
    weights: dict[Task, float] = field(default_factory=_default_weights)

    def __post_init__(self):
        self.weights = {Task(k) if not isinstance(k, str) else Task[k]: float(v) for k, v in self.weights.items()}
        if any(v < 0 for v in self.weights.values()):
            raise ValueError("task weights must be non-negative")
        if sum(self.weights.values()) <= 0:
            raise ValueError("at least one task weight must be positive")

    @classmethod
    def uniform(cls, tasks=tuple(Task)) -> "SampleMix":
        return cls({Task(t): 1.0 for t in tasks})

    def probabilities(self) -> tuple[list[Task], np.ndarray]:
        tasks = [t for t, w in self.weights.items() if w > 0]
        p = np.array([self.weights[t] for t in tasks])
        return tasks, p / p.sum()


@dataclass
class TrainingPair:
    templates: list[tuple[ModalFrame, np.ndarray]]
    search: tuple[ModalFrame, np.ndarray]
    task: Task


def draw_tasks(mix: SampleMix, n: int, rng: np.random.Generator) -> list[Task]:
    tasks, p = mix.probabilities()
    return [tasks[i] for i in rng.choice(len(tasks), size=n, p=p)]


def sample_indices(
    pool: list[SyntheticSequence],
    mix: SampleMix,
    batch: int,
    rng: np.random.Generator,
    max_gap: int = 20,
    num_templates: int = 2,
) -> list[tuple[int, list[int], int]]:
    """(sequence index, template frame indices, search frame index) per draw."""
    by_task: dict[Task, list[int]] = {}
    for i, seq in enumerate(pool):
        by_task.setdefault(seq.task, []).append(i)
    tasks, _ = mix.probabilities()
    for t in tasks:
        if not by_task.get(t):
            raise ValueError(f"no sequences in the pool for weighted task {t.name}")
    draws = []
    for task in draw_tasks(mix, batch, rng):
        members = by_task[task]
        si = members[int(rng.integers(len(members)))]
        n = len(pool[si])
        search = int(rng.integers(n))
        lo, hi = max(0, search - max_gap), min(n - 1, search + max_gap)
        temps = [int(v) for v in rng.integers(lo, hi + 1, size=num_templates)]
        draws.append((si, temps, search))
    return draws


def sample_batch(
    pool: list[SyntheticSequence],
    mix: SampleMix,
    batch: int,
    rng: np.random.Generator,
    max_gap: int = 20,
    num_templates: int = 2,
) -> list[TrainingPair]:
    """Task-weighted draw of template/search frame pairs from one sequence each."""
    out = []
    for si, temps, search in sample_indices(pool, mix, batch, rng, max_gap, num_templates):
        seq = pool[si]
        frames = seq.frames
        out.append(
            TrainingPair(
                [(frames[k], seq.boxes[k].astype(np.float64)) for k in temps],
                (frames[search], seq.boxes[search].astype(np.float64)),
                seq.task,
            )
        )
    return out
