"""Benchmark-style tracking metrics and ranking AUC."""
import numpy as np

from patchrank.errors import InputError
from patchrank.features import iou

SR_THRESHOLDS = np.linspace(0.0, 1.0, 101)


def center_errors(pred, gt):
    if len(pred) != len(gt):
        raise InputError(f"trajectory lengths differ: {len(pred)} predicted vs {len(gt)} ground truth")
    return np.array([np.hypot(p.center[0] - g.center[0], p.center[1] - g.center[1])
                     for p, g in zip(pred, gt)])


def overlaps(pred, gt):
    if len(pred) != len(gt):
        raise InputError(f"trajectory lengths differ: {len(pred)} predicted vs {len(gt)} ground truth")
    return np.array([iou(p, g) for p, g in zip(pred, gt)])


def eval_pr_sr(pred, gt, radius=20.0):
    """Precision at ``radius`` pixels and area under the success curve."""
    err = center_errors(pred, gt)
    ov = overlaps(pred, gt)
    if err.size == 0:
        raise InputError("empty trajectories")
    pr = float(np.mean(err <= radius))
    success = (ov[None, :] >= SR_THRESHOLDS[:, None]).mean(axis=1)
    return pr, float(success.mean())


def auc(scores, labels):
    """Probability that a random positive outranks a random negative (ties count half)."""
    scores = np.asarray(scores, dtype=float)
    labels = np.asarray(labels).astype(bool)
    pos, neg = scores[labels], scores[~labels]
    if pos.size == 0 or neg.size == 0:
        raise InputError("AUC needs both positive and negative samples")
    diff = pos[:, None] - neg[None, :]
    return float(np.mean((diff > 0) + 0.5 * (diff == 0)))
