from __future__ import annotations

import numpy as np

from .. import autodiff as ad
from ..autodiff import Tensor
from ..errors import DimMismatch
from ..raster import BinaryMask

SOFT_DICE_SMOOTH = 1.0


def dice_bce_loss(logits: Tensor, gt: BinaryMask) -> Tensor:
    """Mean binary cross-entropy of sigmoid(logits) plus (1 - soft Dice).

    BCE is evaluated in the logits form softplus(z) - y*z, which equals
    -[y log p + (1-y) log(1-p)] for p = sigmoid(z) without the overflow.
    Soft Dice uses smoothing 1 in numerator and denominator.
    """
    y = gt.array.astype(np.float64) if isinstance(gt, BinaryMask) else np.asarray(gt, dtype=np.float64)
    if logits.shape != y.shape:
        raise DimMismatch(f"logits {logits.shape} and mask {y.shape} differ")
    Y = Tensor(y)
    bce = ad.mean(ad.sub(ad.softplus(logits), ad.mul(logits, Y)))
    p = ad.sigmoid(logits)
    num = ad.add_scalar(ad.scale(ad.sum(ad.mul(p, Y)), 2.0), SOFT_DICE_SMOOTH)
    den = ad.add_scalar(ad.sum(p), float(y.sum()) + SOFT_DICE_SMOOTH)
    soft_dice = ad.div(num, den)
    return ad.add(bce, ad.add_scalar(ad.scale(soft_dice, -1.0), 1.0))
