"""Overlap metrics on hard masks."""

from __future__ import annotations

import numpy as np

from ..errors import DimMismatch
from ..raster import BinaryMask


def _arrays(pred, gt):
    p = pred.array if isinstance(pred, BinaryMask) else np.asarray(pred, dtype=bool)
    g = gt.array if isinstance(gt, BinaryMask) else np.asarray(gt, dtype=bool)
    if p.shape != g.shape:
        raise DimMismatch(f"prediction {p.shape} and ground truth {g.shape} differ")
    return p, g


def dice(pred, gt) -> float:
    """2|P & G| / (|P| + |G|); 1.0 when both are empty."""
    p, g = _arrays(pred, gt)
    total = int(p.sum()) + int(g.sum())
    if total == 0:
        return 1.0
    return 2.0 * int((p & g).sum()) / total


def iou(pred, gt) -> float:
    """|P & G| / |P | G|; 1.0 when both are empty."""
    p, g = _arrays(pred, gt)
    union = int((p | g).sum())
    if union == 0:
        return 1.0
    return int((p & g).sum()) / union


def predict_mask(logits) -> BinaryMask:
    """Threshold logits at 0 (probability 0.5)."""
    data = getattr(logits, "data", logits)
    return BinaryMask.from_array(np.asarray(data) > 0)
