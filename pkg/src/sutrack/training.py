"""Batch assembly, the training loop and the evaluation helpers used by the CLI."""
from __future__ import annotations

from dataclasses import asdict, dataclass, field, fields
from typing import Callable

import numpy as np

from .data.metrics import metrics
from .data.sampler import SampleMix, TrainingPair, sample_batch
from .data.synthetic import SyntheticSequence
from .embedding import ModalFrame, concat_channels, text_feature
from .losses import LossReport, LossWeights, Targets, center_cell, focal_target, total_loss
from .model import ModelInputs, TrackerModel
from .numerics import AdamW, F, no_grad
from .tracker import SEARCH_FACTOR, Template, Tracker, crop_frame

LOSS_COLUMNS = ("step",) + LossReport.FIELDS


@dataclass
class TrainConfig:
    steps: int = 2000
    batch: int = 16
    seed: int = 0
    # the reference rates are tiny because they fine-tune a pretrained
    # backbone; a from-scratch toy needs them multiplied up
    lr_encoder: float = 1e-5
    lr_other: float = 1e-4
    lr_scale: float = 30.0
    weight_decay: float = 1e-4
    lr_drop_at: float = 0.8
    lr_drop: float = 0.1
    lambda_giou: float = 2.0
    lambda_l1: float = 5.0
    task_loss: bool = True
    focal_alpha: float = 2.0
    focal_beta: float = 4.0
    max_gap: int = 20
    center_jitter: float = 0.6
    scale_jitter: float = 0.15
    mix: dict = field(default_factory=lambda: {t.name: w for t, w in SampleMix().weights.items()})
    drop_aux: bool = False

    def sample_mix(self) -> SampleMix:
        return SampleMix(dict(self.mix))

    def loss_weights(self) -> LossWeights:
        return LossWeights(self.lambda_giou, self.lambda_l1, self.task_loss)

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "TrainConfig":
        known = {f.name for f in fields(cls)}
        unknown = sorted(set(d) - known)
        if unknown:
            raise KeyError(f"unknown train config keys: {unknown}")
        return cls(**d)


def drop_aux(frame: ModalFrame) -> ModalFrame:
    """The same frame with its auxiliary image replaced by zeros."""
    if frame.aux is None:
        return frame
    return ModalFrame(frame.rgb, np.zeros_like(frame.aux), frame.language, frame.task)


def _jittered(box: np.ndarray, rng: np.random.Generator, shift: float, scale: float) -> np.ndarray:
    x0, y0, x1, y1 = box
    w, h = x1 - x0, y1 - y0
    s = np.sqrt(w * h)
    cx, cy = (x0 + x1) / 2 + rng.uniform(-shift, shift) * s, (y0 + y1) / 2 + rng.uniform(-shift, shift) * s
    k = np.exp(rng.uniform(-scale, scale))
    return np.array([cx - k * w / 2, cy - k * h / 2, cx + k * w / 2, cy + k * h / 2])


def make_batch(
    pairs: list[TrainingPair],
    model_cfg,
    rng: np.random.Generator,
    center_jitter: float = 0.6,
    scale_jitter: float = 0.15,
    aux_dropped: bool = False,
) -> tuple[ModelInputs, Targets]:
    """Crop templates and a jittered search region for each pair and build targets."""
    size, grid, patch = model_cfg.search_size, model_cfg.search_grid, model_cfg.patch_size
    temps, masks, searches, texts = [], [], [], []
    heat, boxes, cells, tasks = [], [], [], []
    for pair in pairs:
        imgs, fracs = [], []
        for frame, box in pair.templates:
            frame = drop_aux(frame) if aux_dropped else frame
            tmpl = Template.from_frame(frame, box, model_cfg)
            imgs.append(tmpl.image)
            fracs.append(tmpl.fractions)
        frame, box = pair.search
        frame = drop_aux(frame) if aux_dropped else frame
        ref = _jittered(box, rng, center_jitter, scale_jitter)
        cropped, t, _ = crop_frame(frame, ref, SEARCH_FACTOR, size)
        gt = t.to_crop(box)
        # keep the center strictly inside the crop so the target cell exists
        gt_c = np.clip((gt[:2] + gt[2:]) / 2, 0.0, size - 1e-6)
        half = (gt[2:] - gt[:2]) / 2
        gt = np.concatenate([gt_c - half, gt_c + half])
        temps.append(np.stack(imgs))
        masks.append(np.stack(fracs))
        searches.append(concat_channels(cropped))
        texts.append(text_feature(frame.language, model_cfg.dim))
        heat.append(focal_target(gt, grid, patch))
        boxes.append(gt / size)
        cells.append(center_cell(gt, patch))
        tasks.append(int(pair.task))
    inputs = ModelInputs(np.stack(temps), np.stack(masks), np.stack(searches), np.stack(texts))
    targets = Targets(np.stack(heat), np.stack(boxes), np.array(cells), np.array(tasks))
    return inputs, targets


def make_optimizer(model: TrackerModel, cfg: TrainConfig) -> AdamW:
    lr = {"encoder": cfg.lr_encoder * cfg.lr_scale, "other": cfg.lr_other * cfg.lr_scale}
    return AdamW(model.parameters(), lr=lr, weight_decay=cfg.weight_decay)


def train(
    model: TrackerModel,
    pool: list[SyntheticSequence],
    cfg: TrainConfig,
    callback: Callable[[int, tuple], None] | None = None,
) -> list[tuple]:
    """Run ``cfg.steps`` AdamW steps; returns one (step, class, iou, l1, task, total) row per step."""
    rng = np.random.default_rng(cfg.seed)
    opt = make_optimizer(model, cfg)
    base = dict(opt.state.lr)
    drop_step = int(cfg.lr_drop_at * cfg.steps)
    mix = cfg.sample_mix()
    weights = cfg.loss_weights()
    history = []
    for step in range(cfg.steps):
        if step == drop_step:
            opt.state.lr = {k: v * cfg.lr_drop for k, v in base.items()}
        pairs = sample_batch(pool, mix, cfg.batch, rng, cfg.max_gap)
        inputs, targets = make_batch(
            pairs, model.cfg, rng, cfg.center_jitter, cfg.scale_jitter, cfg.drop_aux
        )
        out, logits, _ = model.forward(inputs)
        report = total_loss(out, logits, targets, weights, cfg.focal_alpha, cfg.focal_beta)
        model.zero_grad()
        report.total.backward()
        opt.step()
        row = (step,) + report.values()
        history.append(row)
        if callback is not None:
            callback(step, row)
    return history


def task_accuracy(
    model: TrackerModel,
    pool: list[SyntheticSequence],
    samples: int,
    seed: int,
    mix: SampleMix | None = None,
    batch: int = 50,
) -> tuple[float, float]:
    """Task-head accuracy and mean cross-entropy on freshly drawn samples."""
    rng = np.random.default_rng(seed)
    mix = mix or SampleMix()
    correct, ce, done = 0, 0.0, 0
    with no_grad():
        while done < samples:
            n = min(batch, samples - done)
            pairs = sample_batch(pool, mix, n, rng)
            inputs, targets = make_batch(pairs, model.cfg, rng)
            _, logits, _ = model.forward(inputs)
            lp = F.log_softmax(logits).data
            correct += int((lp.argmax(axis=1) == targets.tasks).sum())
            ce -= float(lp[np.arange(n), targets.tasks].sum())
            done += n
    return correct / samples, ce / samples


def track_sequence(tracker: Tracker, seq: SyntheticSequence, aux_dropped: bool = False):
    frames = seq.frames
    if aux_dropped:
        frames = [drop_aux(f) for f in frames]
    return tracker.track(frames, seq.boxes[0].astype(np.float64))


def evaluate_tracking(
    model: TrackerModel,
    pool: list[SyntheticSequence],
    aux_dropped: bool = False,
    **tracker_kw,
) -> dict[str, float]:
    """Track every sequence from its first box; frame 0 is excluded from the scores."""
    tracker = Tracker(model, **tracker_kw)
    preds, gts = [], []
    for seq in pool:
        boxes, _ = track_sequence(tracker, seq, aux_dropped)
        preds.append(boxes[1:])
        gts.append(seq.boxes[1:])
    return metrics(np.concatenate(preds), np.concatenate(gts))


__all__ = [
    "LOSS_COLUMNS",
    "TrainConfig",
    "drop_aux",
    "evaluate_tracking",
    "make_batch",
    "make_optimizer",
    "task_accuracy",
    "track_sequence",
    "train",
]
