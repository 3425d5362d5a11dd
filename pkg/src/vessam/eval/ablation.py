"""Six-configuration prompt ablation."""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from ..model import ModelConfig, PromptFlags, init_params
from .data import split
from .train import evaluate, train

ABLATION_FLAGS = (
    PromptFlags(True, False, False),
    PromptFlags(False, True, False),
    PromptFlags(False, False, True),
    PromptFlags(True, True, False),
    PromptFlags(True, False, True),
    PromptFlags(True, True, True),
)


@dataclass(frozen=True)
class AblationConfig:
    seed: int = 42
    epochs: int = 30
    lr: float = 1e-3
    n_test: int = 50
    model: ModelConfig = field(default_factory=ModelConfig)
    configs: tuple[PromptFlags, ...] = ABLATION_FLAGS

    def __post_init__(self):
        if len(self.configs) != 6 or set(self.configs) != set(ABLATION_FLAGS):
            raise ValueError("an ablation runs exactly the six standard prompt combinations")


@dataclass
class AblationRow:
    flags: PromptFlags
    dice: float
    iou: float
    n_test: int
    per_image: list[dict]
    epoch_losses: list[float]

    def to_dict(self) -> dict:
        return {"config": self.flags.names, "dice": self.dice, "iou": self.iou, "n_test": self.n_test}


def run_ablation(ac: AblationConfig, dataset, progress=None) -> list[AblationRow]:
    """Train one model per prompt combination from the same initial
    parameters and score it on the held-out split."""
    train_set, test_set = split(dataset, ac.n_test, ac.seed)
    rows = []
    for k, flags in enumerate(ac.configs):
        params = init_params(ac.model)
        result = train(params, train_set, ac.model, flags, epochs=ac.epochs, lr=ac.lr, seed=ac.seed + k)
        per_image = evaluate(params, test_set, ac.model, flags)
        rows.append(AblationRow(
            flags,
            float(np.mean([r["dice"] for r in per_image])),
            float(np.mean([r["iou"] for r in per_image])),
            len(test_set),
            per_image,
            result.epoch_losses,
        ))
        if progress is not None:
            progress(rows[-1])
    return rows


def results_json(rows) -> str:
    return json.dumps([r.to_dict() for r in rows], indent=2) + "\n"


def results_table(rows) -> str:
    lines = [f"{'config':<14} {'dice':>8} {'iou':>8} {'n_test':>7}"]
    for r in rows:
        lines.append(f"{str(r.flags):<14} {r.dice:>8.4f} {r.iou:>8.4f} {r.n_test:>7d}")
    return "\n".join(lines) + "\n"
