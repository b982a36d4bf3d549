"""Reconstruction and combined losses for the multitask network."""

from __future__ import annotations

import math

import numpy as np

from ..errors import ShapeMismatch


def mse_loss(target, prediction) -> float:
    """Mean over batch items of the squared Euclidean distance per item.

    Inputs are batch-first; a 1-D array is treated as a single item.
    """
    t = np.asarray(target, dtype=np.float64)
    p = np.asarray(prediction, dtype=np.float64)
    if t.shape != p.shape:
        raise ShapeMismatch(f"target shape {t.shape} != prediction shape {p.shape}")
    if t.ndim == 1:
        t = t[None, :]
        p = p[None, :]
    n = t.shape[0]
    diff = (t - p).reshape(n, -1)
    # Divergent training overflows to inf here; the train loop turns that
    # into NonFiniteLoss, so the warning is noise.
    with np.errstate(over="ignore"):
        return float(np.mean(np.sum(diff * diff, axis=1)))


def total_loss(rec: float, pred: float, weights=(1.0, 1.0)) -> float:
    """Weighted sum of the two task losses; defaults give the plain sum."""
    w_rec, w_pred = weights
    value = w_rec * float(rec) + w_pred * float(pred)
    if not math.isfinite(value):
        raise ArithmeticError(f"total loss is non-finite: {value!r}")
    return value
