"""Minimal reverse-mode automatic differentiation over float64 arrays."""

from .checkpoint import load_params, save_params
from .gradcheck import GradCheckReport, grad_check, rel_err
from .ops import (
    add,
    add_scalar,
    bias_add,
    concat,
    conv2d,
    depthwise_conv2d,
    div,
    downsample,
    feature_mul,
    gather_rows,
    layer_norm,
    log,
    matmul,
    mean,
    mul,
    relu,
    reshape,
    scale,
    sigmoid,
    softmax,
    softplus,
    sub,
    sum,
    take,
    transpose,
    upsample,
)
from .tensor import Tape, Tensor, active_tape, as_tensor, backward, kink_monitor, record

__all__ = [
    "Tape", "Tensor", "GradCheckReport", "active_tape", "as_tensor", "backward", "kink_monitor", "record",
    "grad_check", "rel_err", "save_params", "load_params",
    "add", "add_scalar", "bias_add", "concat", "conv2d", "depthwise_conv2d", "div",
    "downsample", "feature_mul", "gather_rows", "layer_norm", "log", "matmul", "mean",
    "mul", "relu", "reshape", "scale", "sigmoid", "softmax", "softplus", "sub", "sum",
    "take", "transpose", "upsample",
]
