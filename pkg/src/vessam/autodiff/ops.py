"""Differentiable operators.

No broadcasting: binary elementwise ops need equal shapes.  The explicit
``bias_add`` / ``feature_mul`` ops cover the one broadcast pattern the model
needs (a vector applied along the last axis).  Convolutions follow the
cross-correlation convention.
"""

from __future__ import annotations

from typing import Sequence

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from ..errors import EmptyConcat, NonDivisibleExtent, NonIntegralOutput, ShapeMismatch
from .tensor import Tensor, note_kinks, record


def _same_shape(a: Tensor, b: Tensor, op: str):
    if a.shape != b.shape:
        raise ShapeMismatch(f"{op}: shapes {a.shape} and {b.shape} differ")


# --- linear algebra ---------------------------------------------------------


def matmul(a: Tensor, b: Tensor) -> Tensor:
    """(m, k) @ (k, n), or batched (B, m, k) @ (B, k, n)."""
    if a.ndim != b.ndim or a.ndim not in (2, 3):
        raise ShapeMismatch(f"matmul: unsupported ranks {a.shape} @ {b.shape}")
    if a.shape[-1] != b.shape[-2] or (a.ndim == 3 and a.shape[0] != b.shape[0]):
        raise ShapeMismatch(f"matmul: {a.shape} @ {b.shape}")
    A, B = a.data, b.data
    out = A @ B

    def vjp(g):
        return g @ np.swapaxes(B, -1, -2), np.swapaxes(A, -1, -2) @ g

    return record(out, (a, b), vjp)


def transpose(x: Tensor, axes: Sequence[int] | None = None) -> Tensor:
    axes = tuple(reversed(range(x.ndim))) if axes is None else tuple(axes)
    inverse = tuple(np.argsort(axes))
    return record(np.transpose(x.data, axes), (x,), lambda g: (np.transpose(g, inverse),))


def reshape(x: Tensor, shape: Sequence[int]) -> Tensor:
    shape = tuple(shape)
    try:
        out = x.data.reshape(shape)
    except ValueError as exc:
        raise ShapeMismatch(f"reshape: {x.shape} -> {shape}") from exc
    return record(out, (x,), lambda g: (g.reshape(x.shape),))


# --- convolution -------------------------------------------------------------


def _conv_geometry(h, w, kh, kw, stride, padding):
    if stride < 1 or padding < 0:
        raise ShapeMismatch("conv: stride must be >= 1 and padding >= 0")
    hp, wp = h + 2 * padding, w + 2 * padding
    if kh > hp or kw > wp:
        raise ShapeMismatch(f"conv: kernel {kh}x{kw} larger than padded input {hp}x{wp}")
    if (hp - kh) % stride or (wp - kw) % stride:
        raise NonIntegralOutput(
            f"conv: ({hp}-{kh})/{stride} or ({wp}-{kw})/{stride} is not integral"
        )
    return (hp - kh) // stride + 1, (wp - kw) // stride + 1


def _windows(xp: np.ndarray, kh, kw, stride):
    return sliding_window_view(xp, (kh, kw), axis=(1, 2))[:, ::stride, ::stride]


def _scatter_windows(gxp: np.ndarray, contrib, kh, kw, stride, ho, wo):
    # contrib(i, j) -> (C, ho, wo) gradient for kernel tap (i, j)
    for i in range(kh):
        for j in range(kw):
            gxp[:, i : i + stride * (ho - 1) + 1 : stride, j : j + stride * (wo - 1) + 1 : stride] += contrib(i, j)


def conv2d(x: Tensor, w: Tensor, b: Tensor | None = None, stride: int = 1, padding: int = 0) -> Tensor:
    """x: (C_in, H, W), w: (C_out, C_in, kh, kw), optional b: (C_out,)."""
    if x.ndim != 3 or w.ndim != 4 or w.shape[1] != x.shape[0]:
        raise ShapeMismatch(f"conv2d: input {x.shape} vs kernel {w.shape}")
    if b is not None and b.shape != (w.shape[0],):
        raise ShapeMismatch(f"conv2d: bias {b.shape} vs {w.shape[0]} output channels")
    c, h, wd = x.shape
    co, _, kh, kw = w.shape
    ho, wo = _conv_geometry(h, wd, kh, kw, stride, padding)
    xp = np.pad(x.data, ((0, 0), (padding, padding), (padding, padding)))
    win = _windows(xp, kh, kw, stride)  # (C, ho, wo, kh, kw)
    W = w.data
    out = np.tensordot(W, win, axes=([1, 2, 3], [0, 3, 4]))  # (co, ho, wo)
    if b is not None:
        out = out + b.data[:, None, None]

    def vjp(g):
        gw = np.tensordot(g, win, axes=([1, 2], [1, 2])) if w.requires_grad else None
        gx = None
        if x.requires_grad:
            gxp = np.zeros_like(xp)
            _scatter_windows(gxp, lambda i, j: np.tensordot(W[:, :, i, j], g, axes=([0], [0])), kh, kw, stride, ho, wo)
            gx = gxp[:, padding : padding + h, padding : padding + wd]
        gb = g.sum(axis=(1, 2)) if b is not None and b.requires_grad else None
        return (gx, gw) if b is None else (gx, gw, gb)

    inputs = (x, w) if b is None else (x, w, b)
    return record(out, inputs, vjp)


def depthwise_conv2d(x: Tensor, w: Tensor, b: Tensor | None = None, stride: int = 1, padding: int = 0) -> Tensor:
    """x: (C, H, W), w: (C, kh, kw): one kernel per channel, no channel mixing."""
    if x.ndim != 3 or w.ndim != 3 or w.shape[0] != x.shape[0]:
        raise ShapeMismatch(f"depthwise_conv2d: input {x.shape} vs kernel {w.shape}")
    if b is not None and b.shape != (w.shape[0],):
        raise ShapeMismatch(f"depthwise_conv2d: bias {b.shape} vs {w.shape[0]} channels")
    c, h, wd = x.shape
    _, kh, kw = w.shape
    ho, wo = _conv_geometry(h, wd, kh, kw, stride, padding)
    xp = np.pad(x.data, ((0, 0), (padding, padding), (padding, padding)))
    win = _windows(xp, kh, kw, stride)
    W = w.data
    out = np.einsum("chwij,cij->chw", win, W)
    if b is not None:
        out = out + b.data[:, None, None]

    def vjp(g):
        gw = np.einsum("chw,chwij->cij", g, win) if w.requires_grad else None
        gx = None
        if x.requires_grad:
            gxp = np.zeros_like(xp)
            _scatter_windows(gxp, lambda i, j: W[:, i, j][:, None, None] * g, kh, kw, stride, ho, wo)
            gx = gxp[:, padding : padding + h, padding : padding + wd]
        gb = g.sum(axis=(1, 2)) if b is not None and b.requires_grad else None
        return (gx, gw) if b is None else (gx, gw, gb)

    inputs = (x, w) if b is None else (x, w, b)
    return record(out, inputs, vjp)


def downsample(x: Tensor, factor: int) -> Tensor:
    """f x f average pooling over the last two axes of (C, H, W)."""
    c, h, w = x.shape
    f = int(factor)
    if h % f or w % f:
        raise NonDivisibleExtent(f"downsample: {h}x{w} not divisible by {f}")
    out = x.data.reshape(c, h // f, f, w // f, f).mean(axis=(2, 4))

    def vjp(g):
        return (np.repeat(np.repeat(g, f, axis=1), f, axis=2) / (f * f),)

    return record(out, (x,), vjp)


def upsample(x: Tensor, factor: int) -> Tensor:
    """Nearest-neighbour replication by ``factor`` over (C, H, W)."""
    c, h, w = x.shape
    f = int(factor)
    out = np.repeat(np.repeat(x.data, f, axis=1), f, axis=2)

    def vjp(g):
        return (g.reshape(c, h, f, w, f).sum(axis=(2, 4)),)

    return record(out, (x,), vjp)


# --- elementwise -------------------------------------------------------------


def relu(x: Tensor) -> Tensor:
    on = x.data > 0
    note_kinks(on)
    return record(np.maximum(x.data, 0.0), (x,), lambda g: (g * on,))


def sigmoid(x: Tensor) -> Tensor:
    # split by sign to avoid overflow in exp
    d = x.data
    e = np.exp(-np.abs(d))
    y = np.where(d >= 0, 1.0 / (1.0 + e), e / (1.0 + e))
    return record(y, (x,), lambda g: (g * y * (1.0 - y),))


def softplus(x: Tensor) -> Tensor:
    """log(1 + exp(x)), computed stably."""
    d = x.data
    y = np.maximum(d, 0.0) + np.log1p(np.exp(-np.abs(d)))
    e = np.exp(-np.abs(d))
    s = np.where(d >= 0, 1.0 / (1.0 + e), e / (1.0 + e))
    return record(y, (x,), lambda g: (g * s,))


def log(x: Tensor) -> Tensor:
    d = x.data
    return record(np.log(d), (x,), lambda g: (g / d,))


def add(a: Tensor, b: Tensor) -> Tensor:
    _same_shape(a, b, "add")
    return record(a.data + b.data, (a, b), lambda g: (g, g))


def sub(a: Tensor, b: Tensor) -> Tensor:
    _same_shape(a, b, "sub")
    return record(a.data - b.data, (a, b), lambda g: (g, -g))


def mul(a: Tensor, b: Tensor) -> Tensor:
    _same_shape(a, b, "mul")
    A, B = a.data, b.data
    return record(A * B, (a, b), lambda g: (g * B, g * A))


def div(a: Tensor, b: Tensor) -> Tensor:
    _same_shape(a, b, "div")
    A, B = a.data, b.data
    return record(A / B, (a, b), lambda g: (g / B, -g * A / (B * B)))


def scale(x: Tensor, s) -> Tensor:
    """Multiply by a constant, or by a single-element tensor (differentiable)."""
    if isinstance(s, Tensor):
        if s.size != 1:
            raise ShapeMismatch(f"scale: factor must have one element, got {s.shape}")
        X, S = x.data, s.data
        return record(X * S.reshape(()), (x, s), lambda g: (g * S.reshape(()), np.sum(g * X).reshape(S.shape)))
    s = float(s)
    return record(x.data * s, (x,), lambda g: (g * s,))


def add_scalar(x: Tensor, c: float) -> Tensor:
    c = float(c)
    return record(x.data + c, (x,), lambda g: (g,))


def bias_add(x: Tensor, b: Tensor) -> Tensor:
    """x[..., d] + b[d]."""
    if b.ndim != 1 or x.shape[-1:] != b.shape:
        raise ShapeMismatch(f"bias_add: {x.shape} + {b.shape}")
    axes = tuple(range(x.ndim - 1))
    return record(x.data + b.data, (x, b), lambda g: (g, g.sum(axis=axes)))


def feature_mul(x: Tensor, gamma: Tensor) -> Tensor:
    """x[..., d] * gamma[d]."""
    if gamma.ndim != 1 or x.shape[-1:] != gamma.shape:
        raise ShapeMismatch(f"feature_mul: {x.shape} * {gamma.shape}")
    X, G = x.data, gamma.data
    axes = tuple(range(x.ndim - 1))
    return record(X * G, (x, gamma), lambda g: (g * G, (g * X).sum(axis=axes)))


# --- structural ---------------------------------------------------------------


def concat(tensors: Sequence[Tensor], axis: int = 0) -> Tensor:
    tensors = list(tensors)
    if not tensors:
        raise EmptyConcat("concat needs at least one tensor")
    nd = tensors[0].ndim
    axis = axis % nd
    ref = tensors[0].shape
    for t in tensors[1:]:
        if t.ndim != nd or any(t.shape[k] != ref[k] for k in range(nd) if k != axis):
            raise ShapeMismatch(f"concat: {t.shape} incompatible with {ref} along axis {axis}")
    sizes = [t.shape[axis] for t in tensors]
    bounds = np.cumsum([0] + sizes)
    out = np.concatenate([t.data for t in tensors], axis=axis)

    def vjp(g):
        return tuple(
            np.take(g, np.arange(bounds[k], bounds[k + 1]), axis=axis) for k in range(len(tensors))
        )

    return record(out, tensors, vjp)


def take(x: Tensor, start: int, stop: int, axis: int = 0) -> Tensor:
    """Contiguous slice ``start:stop`` along ``axis``."""
    axis = axis % x.ndim
    index = [slice(None)] * x.ndim
    index[axis] = slice(start, stop)
    index = tuple(index)

    def vjp(g):
        full = np.zeros_like(x.data)
        full[index] = g
        return (full,)

    return record(x.data[index], (x,), vjp)


def gather_rows(table: Tensor, idx) -> Tensor:
    """table[idx] for a 2-D table and an integer index vector."""
    idx = np.asarray(idx, dtype=np.int64).reshape(-1)
    if table.ndim != 2:
        raise ShapeMismatch("gather_rows needs a 2-D table")

    def vjp(g):
        full = np.zeros_like(table.data)
        np.add.at(full, idx, g)
        return (full,)

    return record(table.data[idx], (table,), vjp)


# --- reductions and normalisation ----------------------------------------------


def _axes(x: Tensor, axes):
    if axes is None:
        return tuple(range(x.ndim))
    if isinstance(axes, int):
        axes = (axes,)
    return tuple(a % x.ndim for a in axes)


def sum(x: Tensor, axes=None) -> Tensor:  # noqa: A001 - mirrors numpy naming
    ax = _axes(x, axes)
    kept = [1 if k in ax else n for k, n in enumerate(x.shape)]
    return record(x.data.sum(axis=ax), (x,), lambda g: (np.broadcast_to(g.reshape(kept), x.shape).copy(),))


def mean(x: Tensor, axes=None) -> Tensor:
    ax = _axes(x, axes)
    count = int(np.prod([x.shape[k] for k in ax])) if ax else 1
    kept = [1 if k in ax else n for k, n in enumerate(x.shape)]
    return record(
        x.data.mean(axis=ax),
        (x,),
        lambda g: (np.broadcast_to(g.reshape(kept) / count, x.shape).copy(),),
    )


def softmax(x: Tensor, axis: int = -1) -> Tensor:
    d = x.data
    e = np.exp(d - d.max(axis=axis, keepdims=True))
    y = e / e.sum(axis=axis, keepdims=True)

    def vjp(g):
        return (y * (g - (g * y).sum(axis=axis, keepdims=True)),)

    return record(y, (x,), vjp)


def layer_norm(x: Tensor, axis: int = -1, eps: float = 1e-5) -> Tensor:
    """(x - mean) / sqrt(var + eps) over ``axis`` (no affine)."""
    d = x.data
    mu = d.mean(axis=axis, keepdims=True)
    xc = d - mu
    var = (xc * xc).mean(axis=axis, keepdims=True)
    inv = 1.0 / np.sqrt(var + eps)
    xhat = xc * inv

    def vjp(g):
        gm = g.mean(axis=axis, keepdims=True)
        gxm = (g * xhat).mean(axis=axis, keepdims=True)
        return (inv * (g - gm - xhat * gxm),)

    return record(xhat, (x,), vjp)
