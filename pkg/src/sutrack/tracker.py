"""Inference: square crops, windowed decoding and the two-template state machine."""
from __future__ import annotations

import dataclasses
from dataclasses import dataclass
from typing import Protocol

import numpy as np

from .embedding import ModalFrame, box_mask, concat_channels, soft_mask_avg, text_feature
from .heads import HeadOutput
from .model import ModelConfig, ModelInputs
from .numerics import no_grad

TEMPLATE_FACTOR = 2.0
SEARCH_FACTOR = 4.0
MIN_BOX_SIDE = 2.0


@dataclass(frozen=True)
class CropTransform:
    """Square window of side ``side`` (frame pixels) centered at ``center``,
    resampled to ``resolution`` x ``resolution``."""

    center: tuple[float, float]
    side: float
    resolution: int

    @property
    def scale(self) -> float:
        return self.resolution / self.side

    @property
    def origin(self) -> tuple[float, float]:
        return self.center[0] - self.side / 2, self.center[1] - self.side / 2

    def to_crop(self, pts) -> np.ndarray:
        """Map (..., 2k) interleaved x, y frame coordinates into the crop."""
        pts = np.asarray(pts, dtype=np.float64)
        o = np.tile(self.origin, pts.shape[-1] // 2)
        return (pts - o) * self.scale

    def to_frame(self, pts) -> np.ndarray:
        pts = np.asarray(pts, dtype=np.float64)
        o = np.tile(self.origin, pts.shape[-1] // 2)
        return pts / self.scale + o


def crop(image: np.ndarray, box, factor: float, out_res: int):
    """Square crop of side factor * sqrt(w * h) around the box center.

    Pixels outside the frame take the per-channel mean of the in-frame part of
    the window.  Returns (crop, transform, box in crop pixels).
    """
    x0, y0, x1, y1 = (float(v) for v in box)
    w, h = x1 - x0, y1 - y0
    if w <= 0 or h <= 0:
        raise ValueError(f"box {tuple(box)} has zero area")
    side = factor * float(np.sqrt(w * h))
    t = CropTransform(((x0 + x1) / 2, (y0 + y1) / 2), side, out_res)
    return _sample(image, t), t, t.to_crop([x0, y0, x1, y1])


def _sample(image: np.ndarray, t: CropTransform) -> np.ndarray:
    hgt, wid = image.shape[:2]
    ox, oy = t.origin
    step = t.side / t.resolution
    u = np.arange(t.resolution) + 0.5
    cols = np.floor(ox + u * step).astype(np.int64)
    rows = np.floor(oy + u * step).astype(np.int64)
    col_ok = (cols >= 0) & (cols < wid)
    row_ok = (rows >= 0) & (rows < hgt)
    out = image[np.clip(rows, 0, hgt - 1)[:, None], np.clip(cols, 0, wid - 1)[None, :]]
    if col_ok.all() and row_ok.all():
        return out
    # mean over the in-frame part of the source window
    c0, c1 = int(max(0, np.floor(ox))), int(min(wid, np.ceil(ox + t.side)))
    r0, r1 = int(max(0, np.floor(oy))), int(min(hgt, np.ceil(oy + t.side)))
    if c1 > c0 and r1 > r0:
        fill = image[r0:r1, c0:c1].reshape(-1, image.shape[2]).mean(axis=0)
    else:
        fill = image.reshape(-1, image.shape[2]).mean(axis=0)
    out = out.copy()
    out[~(row_ok[:, None] & col_ok[None, :])] = fill
    return out


def crop_frame(frame: ModalFrame, box, factor: float, out_res: int):
    """Crop the RGB and auxiliary images of a frame with one shared transform."""
    rgb, t, b = crop(frame.rgb, box, factor, out_res)
    aux = None if frame.aux is None else _sample(frame.aux, t)
    return ModalFrame(rgb, aux, frame.language, frame.task), t, b


def hanning_window(size: int) -> np.ndarray:
    if size < 2:
        raise ValueError("window size must be at least 2")
    i = np.arange(size)
    w = 0.5 * (1.0 - np.cos(2 * np.pi * i / (size - 1)))
    return np.outer(w, w)


def penalize(score: np.ndarray, window: np.ndarray, mode: str = "multiply", weight: float = 1.0):
    """Apply the positional prior: ``multiply`` scales by (1 - w) + w * window,
    ``blend`` mixes (1 - w) * score + w * window."""
    if mode == "multiply":
        return score * ((1.0 - weight) + weight * window)
    if mode == "blend":
        return (1.0 - weight) * score + weight * window
    raise ValueError(f"unknown window mode {mode!r}")


def decode(
    out: HeadOutput,
    t: CropTransform,
    window: np.ndarray,
    patch: int,
    window_mode: str = "multiply",
    window_weight: float = 1.0,
):
    """Pick the best penalized cell and turn its regression into a frame box.

    Returns (box in frame coordinates, confidence) where confidence is the raw
    score at the chosen cell.
    """
    score = np.asarray(out.score.data)
    offset = np.asarray(out.offset.data)
    size = np.asarray(out.size.data)
    penalized = penalize(score, window, window_mode, window_weight)
    i, j = np.unravel_index(int(np.argmax(penalized)), penalized.shape)
    cx = (j + offset[i, j, 0]) * patch
    cy = (i + offset[i, j, 1]) * patch
    w = size[i, j, 0] * t.resolution
    h = size[i, j, 1] * t.resolution
    box = t.to_frame([cx - w / 2, cy - h / 2, cx + w / 2, cy + h / 2])
    return box, float(score[i, j])


def clamp_box(box, height: int, width: int) -> np.ndarray:
    """Keep the box center inside the frame and its sides within [MIN_BOX_SIDE, frame]."""
    x0, y0, x1, y1 = box
    cx = float(np.clip((x0 + x1) / 2, 0, width))
    cy = float(np.clip((y0 + y1) / 2, 0, height))
    w = float(np.clip(x1 - x0, MIN_BOX_SIDE, width))
    h = float(np.clip(y1 - y0, MIN_BOX_SIDE, height))
    return np.array([cx - w / 2, cy - h / 2, cx + w / 2, cy + h / 2])


@dataclass(frozen=True)
class Template:
    image: np.ndarray  # (Ht, Wt, 6), read-only
    box: np.ndarray  # target box in crop pixels
    fractions: np.ndarray  # per-patch foreground fraction

    @classmethod
    def from_frame(cls, frame: ModalFrame, box, cfg: ModelConfig) -> "Template":
        cropped, _, b = crop_frame(frame, box, TEMPLATE_FACTOR, cfg.template_size)
        img = concat_channels(cropped)
        img.flags.writeable = False
        frac = soft_mask_avg(box_mask(b, cfg.template_size, cfg.template_size), cfg.patch_size)
        frac.flags.writeable = False
        b.flags.writeable = False
        return cls(img, b, frac)


@dataclass(frozen=True)
class TrackerState:
    static_template: Template
    dynamic_template: Template
    frame_index: int
    last_confidence: float
    box: np.ndarray


def should_update(frame_index: int, confidence: float, interval: int, threshold: float) -> bool:
    return frame_index % interval == 0 and confidence > threshold


class TrackModel(Protocol):
    cfg: ModelConfig

    def track_forward(self, inputs: ModelInputs) -> HeadOutput: ...


class Tracker:
    """Runs a model frame by frame with one static and one refreshed template."""

    def __init__(
        self,
        model: TrackModel,
        update_interval: int = 25,
        confidence_threshold: float = 0.7,
        window_mode: str = "multiply",
        window_weight: float = 1.0,
    ):
        self.model = model
        self.cfg = model.cfg
        self.update_interval = update_interval
        self.confidence_threshold = confidence_threshold
        self.window_mode = window_mode
        self.window_weight = window_weight
        self.window = hanning_window(self.cfg.search_grid)

    def init(self, frame: ModalFrame, box) -> TrackerState:
        tmpl = Template.from_frame(frame, box, self.cfg)
        return TrackerState(tmpl, tmpl, 0, 1.0, np.asarray(box, dtype=np.float64))

    def step(self, state: TrackerState, frame: ModalFrame) -> tuple[np.ndarray, TrackerState]:
        cfg = self.cfg
        search, t, _ = crop_frame(frame, state.box, SEARCH_FACTOR, cfg.search_size)
        inputs = ModelInputs(
            templates=np.stack([state.static_template.image, state.dynamic_template.image])[None],
            template_masks=np.stack(
                [state.static_template.fractions, state.dynamic_template.fractions]
            )[None],
            search=concat_channels(search)[None],
            text=text_feature(frame.language, cfg.dim)[None],
        )
        with no_grad():
            out = self.model.track_forward(inputs)
        out = HeadOutput(out.score[0], out.offset[0], out.size[0])
        box, conf = decode(out, t, self.window, cfg.patch_size, self.window_mode, self.window_weight)
        box = clamp_box(box, *frame.shape)
        index = state.frame_index + 1
        dynamic = state.dynamic_template
        if should_update(index, conf, self.update_interval, self.confidence_threshold):
            dynamic = Template.from_frame(frame, box, cfg)
        return box, dataclasses.replace(
            state, dynamic_template=dynamic, frame_index=index, last_confidence=conf, box=box
        )

    def track(self, frames: list[ModalFrame], init_box) -> tuple[np.ndarray, np.ndarray]:
        """Track a whole sequence; row 0 is the given box with confidence 1."""
        state = self.init(frames[0], init_box)
        boxes = [np.asarray(init_box, dtype=np.float64)]
        confs = [1.0]
        for frame in frames[1:]:
            box, state = self.step(state, frame)
            boxes.append(box)
            confs.append(state.last_confidence)
        return np.array(boxes), np.array(confs)


def format_results(boxes: np.ndarray, confidences: np.ndarray) -> str:
    """One ``frame_idx x0 y0 x1 y1 confidence`` line per frame."""
    lines = [
        f"{k} {b[0]:.4f} {b[1]:.4f} {b[2]:.4f} {b[3]:.4f} {c:.6f}"
        for k, (b, c) in enumerate(zip(boxes, confidences))
    ]
    return "\n".join(lines) + "\n"


def parse_results(text: str) -> tuple[np.ndarray, np.ndarray]:
    rows = [line.split() for line in text.splitlines() if line.strip()]
    for k, r in enumerate(rows):
        if len(r) != 6 or int(r[0]) != k:
            raise ValueError(f"malformed result line {k + 1}: {' '.join(r)!r}")
    arr = np.array([[float(v) for v in r[1:]] for r in rows])
    return arr[:, :4], arr[:, 4]
