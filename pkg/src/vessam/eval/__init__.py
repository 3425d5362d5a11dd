"""Metrics, loss, training loop and the prompt ablation harness."""

from .ablation import ABLATION_FLAGS, AblationConfig, AblationRow, results_json, results_table, run_ablation
from .data import (
    Sample,
    benchmark_specs,
    load_dataset_dir,
    make_sample,
    split,
    standard_benchmark,
    synthetic_sample,
)
from .loss import dice_bce_loss
from .metrics import dice, iou, predict_mask
from .train import Adam, TrainResult, evaluate, train
