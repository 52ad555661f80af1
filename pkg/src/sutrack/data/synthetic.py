"""Synthetic five-task tracking sequences.

A colored shape moves on a static textured background among distractor
shapes.  The auxiliary image depends on the task:

* RGBD: inverse depth; a background ramp, distractors mid-gray, target brightest.
* RGBT: pseudo-colored heat; cool background, warm distractors, a hot target blob.
* RGBE: magnitude of the temporal RGB difference (frame 0 differences against
  the empty background).
* RGBL: no auxiliary image; the description names the target ("red square").

In the ``camouflage`` regime the target is not drawn in RGB at all, so only
the auxiliary image reveals it.

Frames are rendered on demand from the stored trajectories, so a sequence
costs little memory however long it is.  All pixel values are rounded to
float32 precision.
"""
from __future__ import annotations

from collections.abc import Sequence
from dataclasses import asdict, dataclass, field

import numpy as np

from ..embedding import ModalFrame, Task

COLORS = {
    "red": (0.9, 0.15, 0.1),
    "green": (0.15, 0.8, 0.2),
    "blue": (0.15, 0.3, 0.95),
    "yellow": (0.95, 0.9, 0.15),
    "cyan": (0.1, 0.85, 0.9),
    "magenta": (0.9, 0.2, 0.85),
    "orange": (1.0, 0.55, 0.05),
    "white": (0.97, 0.97, 0.97),
}
SHAPES = ("square", "circle", "diamond")
REGIMES = ("normal", "camouflage")
# frames are kept on the default patch grid
FRAME_MULTIPLE = 16


@dataclass(frozen=True)
class Descriptor:
    """Generator parameters; together with a seed they fix a sequence exactly."""

    task: Task = Task.RGB
    height: int = 128
    width: int = 128
    shape: str = "square"
    color: str = "red"
    size: tuple[int, int] = (16, 16)
    velocity: tuple[float, float] = (1.5, 1.0)
    start: tuple[float, float] | None = None
    distractors: int = 2
    regime: str = "normal"

    def __post_init__(self):
        object.__setattr__(self, "task", Task(self.task))
        object.__setattr__(self, "size", tuple(int(v) for v in self.size))
        object.__setattr__(self, "velocity", tuple(float(v) for v in self.velocity))
        if self.start is not None:
            object.__setattr__(self, "start", tuple(float(v) for v in self.start))
        if self.shape not in SHAPES:
            raise ValueError(f"unknown shape {self.shape!r}")
        if self.color not in COLORS:
            raise ValueError(f"unknown color {self.color!r}")
        if self.regime not in REGIMES:
            raise ValueError(f"unknown regime {self.regime!r}")
        if self.height % FRAME_MULTIPLE or self.width % FRAME_MULTIPLE:
            raise ValueError(
                f"frame size {self.width}x{self.height} is not a multiple of {FRAME_MULTIPLE}"
            )
        w, h = self.size
        if not (0 < w <= self.width and 0 < h <= self.height):
            raise ValueError(f"target size {self.size} does not fit a {self.width}x{self.height} frame")

    @property
    def language(self) -> str:
        return f"{self.color} {self.shape}"

    def to_dict(self) -> dict:
        d = asdict(self)
        d["task"] = self.task.name
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "Descriptor":
        d = dict(d)
        d["task"] = Task[d["task"]] if isinstance(d["task"], str) else Task(d["task"])
        for key in ("size", "velocity", "start"):
            if d.get(key) is not None:
                d[key] = tuple(d[key])
        return cls(**d)


@dataclass
class _Mover:
    shape: str
    color: tuple[float, float, float]
    boxes: np.ndarray  # (length, 4) integer boxes


def _trajectory(rng, start, velocity, size, height, width, length) -> np.ndarray:
    w, h = size
    x, y = start
    vx, vy = velocity
    boxes = np.empty((length, 4), dtype=np.int64)
    for k in range(length):
        bx, by = int(round(x)), int(round(y))
        boxes[k] = (bx, by, bx + w, by + h)
        x, y = x + vx, y + vy
        if x < 0:
            x, vx = -x, -vx
        if x > width - w:
            x, vx = 2 * (width - w) - x, -vx
        if y < 0:
            y, vy = -y, -vy
        if y > height - h:
            y, vy = 2 * (height - h) - y, -vy
    return boxes


def _shape_mask(shape: str, box, height: int, width: int) -> np.ndarray:
    x0, y0, x1, y1 = box
    rows = np.arange(height)[:, None] + 0.5
    cols = np.arange(width)[None, :] + 0.5
    cx, cy = (x0 + x1) / 2, (y0 + y1) / 2
    hw, hh = (x1 - x0) / 2, (y1 - y0) / 2
    dx, dy = (cols - cx) / hw, (rows - cy) / hh
    if shape == "square":
        return (np.abs(dx) <= 1) & (np.abs(dy) <= 1)
    if shape == "circle":
        return dx * dx + dy * dy <= 1
    return np.abs(dx) + np.abs(dy) <= 1


def _smooth_noise(rng, height: int, width: int, cells: int = 8) -> np.ndarray:
    coarse = rng.random((cells + 1, cells + 1))
    ys = np.linspace(0, cells, height)
    xs = np.linspace(0, cells, width)
    y0 = np.minimum(ys.astype(int), cells - 1)
    x0 = np.minimum(xs.astype(int), cells - 1)
    fy = (ys - y0)[:, None]
    fx = (xs - x0)[None, :]
    a = coarse[y0][:, x0]
    b = coarse[y0][:, x0 + 1]
    c = coarse[y0 + 1][:, x0]
    d = coarse[y0 + 1][:, x0 + 1]
    return a * (1 - fy) * (1 - fx) + b * (1 - fy) * fx + c * fy * (1 - fx) + d * fy * fx


def _f32(a: np.ndarray) -> np.ndarray:
    return np.clip(a, 0.0, 1.0).astype(np.float32).astype(np.float64)


class _LazyFrames(Sequence):
    def __init__(self, seq: "SyntheticSequence"):
        self._seq = seq

    def __len__(self) -> int:
        return len(self._seq.boxes)

    def __getitem__(self, k):
        if isinstance(k, slice):
            return [self[i] for i in range(*k.indices(len(self)))]
        n = len(self)
        if k < 0:
            k += n
        if not 0 <= k < n:
            raise IndexError(k)
        return self._seq.render(k)


@dataclass
class SyntheticSequence:
    """Ground-truth boxes plus everything needed to render each frame."""

    descriptor: Descriptor
    seed: int
    boxes: np.ndarray  # (length, 4) int pixel boxes (x0, y0, x1, y1)
    background: np.ndarray = field(repr=False)
    movers: list = field(repr=False, default_factory=list)  # distractors then target
    stored_frames: list | None = field(repr=False, default=None)

    @property
    def task(self) -> Task:
        return self.descriptor.task

    @property
    def language(self) -> str | None:
        return self.descriptor.language if self.task == Task.RGBL else None

    @property
    def frames(self) -> Sequence[ModalFrame]:
        if self.stored_frames is not None:
            return self.stored_frames
        return _LazyFrames(self)

    def __len__(self) -> int:
        return len(self.boxes)

    def _rgb(self, k: int) -> tuple[np.ndarray, list[np.ndarray]]:
        d = self.descriptor
        img = self.background.copy()
        masks = []
        for i, mv in enumerate(self.movers):
            m = _shape_mask(mv.shape, mv.boxes[k], d.height, d.width)
            masks.append(m)
            is_target = i == len(self.movers) - 1
            if is_target and d.regime == "camouflage":
                continue
            img[m] = mv.color
        return img, masks

    def render(self, k: int) -> ModalFrame:
        if self.stored_frames is not None:
            return self.stored_frames[k]
        d = self.descriptor
        rgb, masks = self._rgb(k)
        aux = None
        if d.task == Task.RGBD:
            aux = self._depth(k, masks)
        elif d.task == Task.RGBT:
            aux = self._thermal(k)
        elif d.task == Task.RGBE:
            prev = self._rgb(k - 1)[0] if k > 0 else self.background
            aux = self._events(rgb, prev)
        return ModalFrame(_f32(rgb), None if aux is None else _f32(aux), self.language, d.task)

    def _depth(self, k: int, masks: list[np.ndarray]) -> np.ndarray:
        d = self.descriptor
        ramp = 0.15 + 0.25 * (np.arange(d.height) / d.height)[:, None] * np.ones((1, d.width))
        depth = ramp.copy()
        for m in masks[:-1]:
            depth[m] = 0.5
        depth[masks[-1]] = 0.9
        return np.repeat(depth[:, :, None], 3, axis=2)

    def _thermal(self, k: int) -> np.ndarray:
        d = self.descriptor
        rows = np.arange(d.height)[:, None] + 0.5
        cols = np.arange(d.width)[None, :] + 0.5
        heat = 0.08 + 0.06 * self.background.mean(axis=2)
        for i, mv in enumerate(self.movers):
            x0, y0, x1, y1 = mv.boxes[k]
            cx, cy = (x0 + x1) / 2, (y0 + y1) / 2
            sx, sy = (x1 - x0) / 2.5, (y1 - y0) / 2.5
            peak = 1.0 if i == len(self.movers) - 1 else 0.35
            blob = peak * np.exp(-(((cols - cx) / sx) ** 2 + ((rows - cy) / sy) ** 2) / 2)
            heat = np.maximum(heat, blob)
        return np.stack([np.clip(1.4 * heat, 0, 1), heat**2, 0.35 * heat], axis=2)

    @staticmethod
    def _events(rgb: np.ndarray, prev: np.ndarray) -> np.ndarray:
        mag = np.abs(rgb - prev).mean(axis=2)
        mag = np.clip(2.0 * mag, 0.0, 1.0)
        return np.repeat(mag[:, :, None], 3, axis=2)


def _pick_start(rng, size, height, width):
    w, h = size
    return float(rng.uniform(0, width - w)), float(rng.uniform(0, height - h))


def generate(descriptor: Descriptor, seed: int, length: int) -> SyntheticSequence:
    """Build a reproducible sequence of ``length`` frames."""
    d = descriptor
    if length < 2:
        raise ValueError("a sequence needs at least 2 frames")
    rng = np.random.default_rng(seed)
    base = np.array(rng.uniform(0.25, 0.6, 3))
    texture = _smooth_noise(rng, d.height, d.width)[:, :, None] * 0.2 - 0.1
    grain = rng.normal(0.0, 0.02, (d.height, d.width, 3))
    background = _f32(base[None, None, :] + texture + grain)

    movers = []
    others = [c for c in COLORS if c != d.color]
    for _ in range(d.distractors):
        size = tuple(int(v) for v in rng.integers(8, 21, 2))
        speed = rng.uniform(0.3, 2.0)
        ang = rng.uniform(0, 2 * np.pi)
        vel = (speed * np.cos(ang), speed * np.sin(ang))
        if d.velocity == (0.0, 0.0):
            vel = (0.0, 0.0)
        boxes = _trajectory(rng, _pick_start(rng, size, d.height, d.width), vel, size, d.height, d.width, length)
        color = COLORS[others[int(rng.integers(len(others)))]]
        movers.append(_Mover(SHAPES[int(rng.integers(len(SHAPES)))], color, boxes))
    start = d.start if d.start is not None else _pick_start(rng, d.size, d.height, d.width)
    target = _trajectory(rng, start, d.velocity, d.size, d.height, d.width, length)
    movers.append(_Mover(d.shape, COLORS[d.color], target))
    return SyntheticSequence(d, seed, target.copy(), background, movers)


def random_descriptor(
    rng: np.random.Generator,
    task: Task,
    regime: str = "normal",
    height: int = 128,
    width: int = 128,
    size_range: tuple[int, int] = (12, 20),
    max_speed: float = 2.5,
    max_distractors: int = 3,
) -> Descriptor:
    w, h = (int(v) for v in rng.integers(size_range[0], size_range[1] + 1, 2))
    speed = rng.uniform(0.5, max_speed)
    ang = rng.uniform(0, 2 * np.pi)
    return Descriptor(
        task=task,
        height=height,
        width=width,
        shape=SHAPES[int(rng.integers(len(SHAPES)))],
        color=list(COLORS)[int(rng.integers(len(COLORS)))],
        size=(w, h),
        velocity=(speed * np.cos(ang), speed * np.sin(ang)),
        distractors=int(rng.integers(0, max_distractors + 1)),
        regime=regime,
    )


def generate_pool(
    count: int,
    length: int,
    seed: int,
    tasks=tuple(Task),
    regime: str = "normal",
    **descriptor_kw,
) -> list[SyntheticSequence]:
    """``count`` sequences cycling through ``tasks``, seeded from one integer."""
    rng = np.random.default_rng(seed)
    pool = []
    tasks = [Task(t) for t in tasks]
    for i in range(count):
        task = tasks[i % len(tasks)]
        desc = random_descriptor(rng, task, regime, **descriptor_kw)
        pool.append(generate(desc, int(rng.integers(2**31)), length))
    return pool
