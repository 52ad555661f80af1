"""One-pass evaluation: success AUC, precision at 20 px and mean IoU."""
from __future__ import annotations

import numpy as np

THRESHOLDS = np.linspace(0.0, 1.0, 21)
PRECISION_RADIUS = 20.0


def box_iou(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """IoU of (N, 4) xyxy boxes, row by row."""
    a = np.asarray(a, dtype=np.float64).reshape(-1, 4)
    b = np.asarray(b, dtype=np.float64).reshape(-1, 4)
    iw = np.clip(np.minimum(a[:, 2], b[:, 2]) - np.maximum(a[:, 0], b[:, 0]), 0, None)
    ih = np.clip(np.minimum(a[:, 3], b[:, 3]) - np.maximum(a[:, 1], b[:, 1]), 0, None)
    inter = iw * ih
    area_a = (a[:, 2] - a[:, 0]) * (a[:, 3] - a[:, 1])
    area_b = (b[:, 2] - b[:, 0]) * (b[:, 3] - b[:, 1])
    union = area_a + area_b - inter
    return np.where(union > 0, inter / np.where(union > 0, union, 1), 0.0)


def center_error(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    a = np.asarray(a, dtype=np.float64).reshape(-1, 4)
    b = np.asarray(b, dtype=np.float64).reshape(-1, 4)
    ca = (a[:, :2] + a[:, 2:]) / 2
    cb = (b[:, :2] + b[:, 2:]) / 2
    return np.hypot(*(ca - cb).T)


def success_curve(ious: np.ndarray) -> np.ndarray:
    """Fraction of frames with IoU strictly above each threshold."""
    return (np.asarray(ious)[None, :] > THRESHOLDS[:, None]).mean(axis=1)


def metrics(pred, gt) -> dict[str, float]:
    pred = np.asarray(pred, dtype=np.float64).reshape(-1, 4)
    gt = np.asarray(gt, dtype=np.float64).reshape(-1, 4)
    if len(pred) != len(gt):
        raise ValueError(f"{len(pred)} predicted boxes vs {len(gt)} ground-truth boxes")
    if len(gt) == 0:
        raise ValueError("no frames to evaluate")
    ious = box_iou(pred, gt)
    return {
        "success_auc": float(success_curve(ious).mean()),
        "precision": float((center_error(pred, gt) <= PRECISION_RADIUS).mean()),
        "mean_iou": float(ious.mean()),
    }
