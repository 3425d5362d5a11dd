"""Shared building blocks: linear maps, affine layer norm, multi-head attention."""

from __future__ import annotations

import threading
from contextlib import contextmanager

import numpy as np

from .. import autodiff as ad
from ..autodiff import Tensor

_attn = threading.local()


@contextmanager
def record_attention():
    """Collect every attention weight array (heads, Nq, Nk) computed inside the block."""
    log: list[np.ndarray] = []
    prev = getattr(_attn, "log", None)
    _attn.log = log
    try:
        yield log
    finally:
        _attn.log = prev


def linear(x: Tensor, params, name: str) -> Tensor:
    out = ad.matmul(x, params[f"{name}.w"])
    b = params.get(f"{name}.b")
    return ad.bias_add(out, b) if b is not None else out


def norm(x: Tensor, params, name: str) -> Tensor:
    y = ad.layer_norm(x, axis=-1)
    return ad.bias_add(ad.feature_mul(y, params[f"{name}.g"]), params[f"{name}.b"])


def _split_heads(x: Tensor, heads: int) -> Tensor:
    n, d = x.shape
    return ad.transpose(ad.reshape(x, (n, heads, d // heads)), (1, 0, 2))


def attention(q_in: Tensor, kv_in: Tensor, params, name: str, heads: int) -> Tensor:
    """Multi-head attention of ``q_in`` rows over ``kv_in`` rows (no projection biases)."""
    nq, d = q_in.shape
    dh = d // heads
    q = _split_heads(ad.matmul(q_in, params[f"{name}.wq"]), heads)  # (h, nq, dh)
    k = _split_heads(ad.matmul(kv_in, params[f"{name}.wk"]), heads)
    v = _split_heads(ad.matmul(kv_in, params[f"{name}.wv"]), heads)
    scores = ad.scale(ad.matmul(q, ad.transpose(k, (0, 2, 1))), 1.0 / np.sqrt(dh))
    weights = ad.softmax(scores, axis=-1)
    log = getattr(_attn, "log", None)
    if log is not None:
        log.append(weights.data.copy())
    ctx = ad.reshape(ad.transpose(ad.matmul(weights, v), (1, 0, 2)), (nq, d))
    return ad.matmul(ctx, params[f"{name}.wo"])


def transformer_block(x: Tensor, params, name: str, heads: int) -> Tensor:
    """Pre-norm self-attention block with a two-layer ReLU MLP."""
    h = norm(x, params, f"{name}.ln1")
    x = ad.add(x, attention(h, h, params, f"{name}.attn", heads))
    h = norm(x, params, f"{name}.ln2")
    h = linear(ad.relu(linear(h, params, f"{name}.mlp1")), params, f"{name}.mlp2")
    return ad.add(x, h)


def tokens_to_map(tokens: Tensor, grid: int) -> Tensor:
    """(T, d) row-major tokens -> (d, grid, grid) feature map."""
    t, d = tokens.shape
    return ad.reshape(ad.transpose(tokens), (d, grid, grid))


def map_to_tokens(fmap: Tensor) -> Tensor:
    d, h, w = fmap.shape
    return ad.transpose(ad.reshape(fmap, (d, h * w)))
