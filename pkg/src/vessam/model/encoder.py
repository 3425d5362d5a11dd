"""Frozen ViT backbone stub and the convolutional adapter on its tokens."""

from __future__ import annotations

import math

import numpy as np

from .. import autodiff as ad
from ..autodiff import Tensor
from ..errors import NonSquareTokenCount, ShapeMismatch
from .config import ModelConfig
from .layers import linear, map_to_tokens, tokens_to_map, transformer_block


def as_image(image, config: ModelConfig) -> Tensor:
    t = image if isinstance(image, Tensor) else Tensor(np.asarray(image, dtype=np.float64))
    if t.ndim == 2:
        t = ad.reshape(t, (1,) + t.shape)
    if t.shape != (1, config.image_size, config.image_size):
        raise ShapeMismatch(
            f"image shape {t.shape} does not match image_size {config.image_size}"
        )
    return t


def vit_stub_forward(image, params, config: ModelConfig) -> Tensor:
    """(1, H, W) image -> (T, d) tokens through patch embedding and pre-norm blocks."""
    x = as_image(image, config)
    g, p = config.grid, config.patch_size
    patches = ad.reshape(
        ad.transpose(ad.reshape(x, (g, p, g, p)), (0, 2, 1, 3)), (g * g, p * p)
    )
    h = ad.add(linear(patches, params, "vit.patch"), params["vit.pos"])
    for i in range(config.vit_depth):
        h = transformer_block(h, params, f"vit.blocks.{i}", config.heads)
    return h


def _conv(x, params, name, padding=0):
    return ad.conv2d(x, params[f"{name}.w"], params[f"{name}.b"], stride=1, padding=padding)


def adapter_forward(tokens: Tensor, params) -> Tensor:
    """tokens + alpha * (map * channel_gate * spatial_gate), alpha starting at 0.

    channel gate: depthwise 3x3 -> 1x1 (d -> d/r) -> ReLU -> 1x1 (d/r -> d) -> sigmoid
    spatial gate: 2x average pool -> 3x3 conv -> 2x nearest upsample -> sigmoid
    """
    t, d = tokens.shape
    side = math.isqrt(t)
    if side * side != t:
        raise NonSquareTokenCount(f"{t} tokens do not form a square grid")
    fmap = tokens_to_map(tokens, side)

    ch = ad.depthwise_conv2d(fmap, params["adapter.dw.w"], params["adapter.dw.b"], padding=1)
    ch = ad.relu(_conv(ch, params, "adapter.pw1"))
    ch = ad.sigmoid(_conv(ch, params, "adapter.pw2"))

    sp = _conv(ad.downsample(fmap, 2), params, "adapter.spatial", padding=1)
    sp = ad.sigmoid(ad.upsample(sp, 2))

    adapted = map_to_tokens(ad.mul(ad.mul(fmap, ch), sp))
    return ad.add(tokens, ad.scale(adapted, params["adapter.alpha"]))

