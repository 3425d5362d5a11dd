"""Adam fine-tuning of the trainable (non-backbone) parameters."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .. import autodiff as ad
from ..autodiff import Tensor
from ..errors import DivergedLoss, EmptyDataset, ShapeMismatch
from ..model import ALL_PROMPTS, ModelConfig, PromptFlags, forward
from .loss import dice_bce_loss
from .metrics import dice, iou, predict_mask


class Adam:
    def __init__(self, params: dict[str, Tensor], lr=1e-3, beta1=0.9, beta2=0.999, eps=1e-8):
        self.params = {k: v for k, v in params.items() if v.requires_grad}
        self.lr, self.beta1, self.beta2, self.eps = lr, beta1, beta2, eps
        self.m = {k: np.zeros_like(v.data) for k, v in self.params.items()}
        self.v = {k: np.zeros_like(v.data) for k, v in self.params.items()}
        self.t = 0

    def zero_grad(self):
        for p in self.params.values():
            p.grad = None

    def step(self):
        self.t += 1
        c1 = 1.0 - self.beta1**self.t
        c2 = 1.0 - self.beta2**self.t
        for k in sorted(self.params):
            p = self.params[k]
            if p.grad is None:
                continue
            m, v = self.m[k], self.v[k]
            m *= self.beta1
            m += (1.0 - self.beta1) * p.grad
            v *= self.beta2
            v += (1.0 - self.beta2) * p.grad * p.grad
            p.data -= self.lr * (m / c1) / (np.sqrt(v / c2) + self.eps)


@dataclass
class TrainResult:
    params: dict[str, Tensor]
    epoch_losses: list[float]
    step_losses: list[float] = field(default_factory=list)


def train_step(sample, params, config, flags, opt: Adam) -> float:
    opt.zero_grad()
    with ad.Tape() as tape:
        logits = forward(sample.image, sample.prompts, sample.graph, params, config, flags)
        loss = dice_bce_loss(logits, sample.mask)
    value = float(loss.data)
    if not math.isfinite(value):
        return value
    ad.backward(loss, tape)
    opt.step()
    return value


def train(
    params: dict[str, Tensor],
    dataset,
    config: ModelConfig,
    flags: PromptFlags = ALL_PROMPTS,
    epochs: int = 1,
    lr: float = 1e-3,
    seed: int = 0,
    max_steps: int | None = None,
    callback=None,
) -> TrainResult:
    """Train in place; the sample order of every epoch is drawn from ``seed``.

    ``callback(epoch, step, loss)`` is called after each step; returning True
    stops training early.
    """
    if not dataset:
        raise EmptyDataset("training needs at least one sample")
    for s in dataset:
        if s.image.shape != (config.image_size, config.image_size):
            raise ShapeMismatch(f"image {s.image.shape} does not match image_size {config.image_size}")
    opt = Adam(params, lr=lr)
    rng = np.random.default_rng(seed)
    epoch_losses, step_losses = [], []
    steps = 0
    for epoch in range(epochs):
        total = 0.0
        order = rng.permutation(len(dataset))
        seen = 0
        stop = False
        for idx in order:
            value = train_step(dataset[idx], params, config, flags, opt)
            if not math.isfinite(value):
                raise DivergedLoss(
                    f"non-finite loss at epoch {epoch}, step {steps}",
                    state={"params": params, "epoch": epoch, "step": steps, "loss": value},
                )
            total += value
            seen += 1
            steps += 1
            step_losses.append(value)
            if callback is not None and callback(epoch, steps, value):
                stop = True
            if stop or (max_steps is not None and steps >= max_steps):
                stop = True
                break
        epoch_losses.append(total / seen)
        if stop:
            break
    return TrainResult(params, epoch_losses, step_losses)


def evaluate(params, dataset, config: ModelConfig, flags: PromptFlags = ALL_PROMPTS) -> list[dict]:
    """Per-sample hard-mask Dice and IoU (threshold at logit 0)."""
    rows = []
    for s in dataset:
        logits = forward(s.image, s.prompts, s.graph, params, config, flags)
        pred = predict_mask(logits)
        rows.append({"dice": dice(pred, s.mask), "iou": iou(pred, s.mask)})
    return rows
