"""Training objective: focal classification, GIoU and L1 box terms, task CE."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .heads import HeadOutput
from .numerics import F, Tensor, as_tensor

PROB_EPS = 1e-12


@dataclass
class LossWeights:
    lambda_giou: float = 2.0
    lambda_l1: float = 5.0
    # False drops the task term from the total (training without task recognition)
    task: bool = True

    def __post_init__(self):
        if self.lambda_giou < 0 or self.lambda_l1 < 0:
            raise ValueError("loss weights must be non-negative")


@dataclass
class LossReport:
    """The four loss terms and their weighted sum, as tensors."""

    cls: Tensor
    iou: Tensor
    l1: Tensor
    task: Tensor
    total: Tensor

    FIELDS = ("class", "iou", "l1", "task", "total")

    def values(self) -> tuple[float, float, float, float, float]:
        return (self.cls.item(), self.iou.item(), self.l1.item(), self.task.item(), self.total.item())


def combine_losses(cls, iou, l1, task, weights: LossWeights = LossWeights()) -> LossReport:
    cls, iou, l1, task = (as_tensor(t) for t in (cls, iou, l1, task))
    total = cls + weights.lambda_giou * iou + weights.lambda_l1 * l1
    if weights.task:
        total = total + task
    return LossReport(cls, iou, l1, task, total)


def focal_target(gt_box, grid: int, patch: int) -> np.ndarray:
    """Gaussian heatmap peaking at 1 on the cell holding the box center.

    ``gt_box`` is (x0, y0, x1, y1) in search-crop pixels.  The spread is
    max(1, diag / 6) cells where diag is the box diagonal in cells.
    """
    x0, y0, x1, y1 = (float(v) for v in gt_box)
    cx, cy = (x0 + x1) / 2, (y0 + y1) / 2
    ci, cj = int(np.floor(cy / patch)), int(np.floor(cx / patch))
    if not (0 <= ci < grid and 0 <= cj < grid):
        raise ValueError(f"box center ({cx:.1f}, {cy:.1f}) lies outside the {grid}x{grid} grid")
    sigma = max(1.0, np.hypot(x1 - x0, y1 - y0) / patch / 6.0)
    ii, jj = np.mgrid[0:grid, 0:grid]
    d2 = (ii - ci) ** 2 + (jj - cj) ** 2
    y = np.exp(-d2 / (2 * sigma * sigma))
    y[ci, cj] = 1.0
    return y


def center_cell(gt_box, patch: int) -> tuple[int, int]:
    x0, y0, x1, y1 = gt_box
    return int(np.floor((y0 + y1) / 2 / patch)), int(np.floor((x0 + x1) / 2 / patch))


def weighted_focal(score: Tensor, target: np.ndarray, alpha: float = 2.0, beta: float = 4.0) -> Tensor:
    """Penalty-reduced focal loss, normalized by positives per sample.

    With a leading batch axis the per-sample losses are averaged.
    """
    p_raw = score.data
    if np.any(~np.isfinite(p_raw)) or np.any(p_raw < 0) or np.any(p_raw > 1):
        raise ValueError("scores must lie in [0, 1]")
    target = np.asarray(target, dtype=np.float64)
    if target.shape != score.shape:
        raise ValueError(f"target shape {target.shape} != score shape {score.shape}")
    p = F.clip(score, PROB_EPS, 1.0 - PROB_EPS)
    pos = target == 1.0
    neg_w = np.where(pos, 0.0, (1.0 - target) ** beta)
    pos_term = ((1.0 - p) ** alpha) * F.log(p) * Tensor(pos.astype(np.float64))
    neg_term = (p**alpha) * F.log(1.0 - p) * Tensor(neg_w)
    grid_axes = (-2, -1)
    n_pos = np.maximum(pos.sum(axis=grid_axes), 1)
    per_sample = -(F.sum(pos_term + neg_term, axis=grid_axes)) / Tensor(n_pos.astype(np.float64))
    return F.mean(per_sample)


def giou(pred, gt) -> Tensor:
    """Generalized IoU of (..., 4) boxes in (x0, y0, x1, y1) form."""
    pred, gt = as_tensor(pred), as_tensor(gt)
    if np.any(pred.data[..., 2:] < pred.data[..., :2]) or np.any(gt.data[..., 2:] < gt.data[..., :2]):
        raise ValueError("boxes need x0 <= x1 and y0 <= y1")
    gt_area_raw = (gt.data[..., 2] - gt.data[..., 0]) * (gt.data[..., 3] - gt.data[..., 1])
    if np.any(gt_area_raw <= 0):
        raise ValueError("ground-truth box has zero area")

    def corner(t, k):
        return t[..., k]

    area_p = (corner(pred, 2) - corner(pred, 0)) * (corner(pred, 3) - corner(pred, 1))
    area_g = (corner(gt, 2) - corner(gt, 0)) * (corner(gt, 3) - corner(gt, 1))
    iw = F.clip(F.minimum(corner(pred, 2), corner(gt, 2)) - F.maximum(corner(pred, 0), corner(gt, 0)), 0.0, np.inf)
    ih = F.clip(F.minimum(corner(pred, 3), corner(gt, 3)) - F.maximum(corner(pred, 1), corner(gt, 1)), 0.0, np.inf)
    inter = iw * ih
    union = area_p + area_g - inter
    hw = F.maximum(corner(pred, 2), corner(gt, 2)) - F.minimum(corner(pred, 0), corner(gt, 0))
    hh = F.maximum(corner(pred, 3), corner(gt, 3)) - F.minimum(corner(pred, 1), corner(gt, 1))
    hull = hw * hh
    return inter / union - (hull - union) / hull


def giou_loss(pred, gt) -> Tensor:
    return F.mean(1.0 - giou(pred, gt))


def task_ce(logits, true_task) -> Tensor:
    """Softmax cross-entropy; batched logits (B, K) give the batch mean."""
    logits = as_tensor(logits)
    labels = np.atleast_1d(np.asarray(true_task, dtype=np.int64))
    lp = F.log_softmax(logits)
    if lp.ndim == 1:
        return -lp[int(labels[0])]
    return -F.mean(lp[np.arange(lp.shape[0]), labels])


def decode_at_cells(out: HeadOutput, cells: np.ndarray) -> Tensor:
    """Normalized (x0, y0, x1, y1) boxes read from each sample's given cell.

    ``cells`` is (B, 2) of (row, col); the output is (B, 4) in units of the
    search side.
    """
    b = np.arange(cells.shape[0])
    rows, cols = cells[:, 0], cells[:, 1]
    s = out.grid
    off = out.offset[b, rows, cols]  # (B, 2)
    size = out.size[b, rows, cols]
    center = (Tensor(np.stack([cols, rows], axis=1).astype(np.float64)) + off) * (1.0 / s)
    half = size * 0.5
    return F.concat([center - half, center + half], axis=1)


@dataclass
class Targets:
    heatmap: np.ndarray  # (B, S, S)
    boxes: np.ndarray  # (B, 4) normalized search-crop boxes
    cells: np.ndarray  # (B, 2) gt center cells
    tasks: np.ndarray  # (B,)


def total_loss(
    out: HeadOutput,
    logits: Tensor,
    targets: Targets,
    weights: LossWeights = LossWeights(),
    alpha: float = 2.0,
    beta: float = 4.0,
) -> LossReport:
    cls = weighted_focal(out.score, targets.heatmap, alpha, beta)
    pred = decode_at_cells(out, targets.cells)
    gt = Tensor(targets.boxes)
    iou = giou_loss(pred, gt)
    l1 = F.mean(F.absolute(pred - gt))
    task = task_ce(logits, targets.tasks)
    return combine_losses(cls, iou, l1, task, weights)

