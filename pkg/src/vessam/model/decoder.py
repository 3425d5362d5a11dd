"""Lightweight mask decoder."""

from __future__ import annotations

from .. import autodiff as ad
from ..autodiff import Tensor
from ..errors import ShapeMismatch
from .config import ModelConfig
from .layers import tokens_to_map, transformer_block
from .prompt_encoder import FeatureSet


def decode(image_tokens: Tensor, fs: FeatureSet, params, config: ModelConfig) -> Tensor:
    """Image tokens + fused prompt tokens -> transformer blocks -> upsampling
    conv stages -> (H, W) logits."""
    t, d = image_tokens.shape
    if t != config.tokens or d != config.embed_dim:
        raise ShapeMismatch(f"image tokens {image_tokens.shape} do not match config")
    if fs.dense_fused is None or fs.graph_fused is None:
        raise ShapeMismatch("decode needs a fused FeatureSet")
    parts = [image_tokens]
    if fs.sparse_fused.shape[0]:
        parts.append(fs.sparse_fused)
    parts += [fs.dense_fused, fs.graph_fused]
    seq = ad.concat(parts, axis=0)
    for i in range(config.decoder_depth):
        seq = transformer_block(seq, params, f"decoder.blocks.{i}", config.heads)

    x = tokens_to_map(ad.take(seq, 0, t, axis=0), config.grid)
    for k in range(config.decoder_upsample_stages):
        x = ad.upsample(x, 2)
        x = ad.relu(ad.conv2d(x, params[f"decoder.up.{k}.w"], params[f"decoder.up.{k}.b"], padding=1))
    x = ad.conv2d(x, params["decoder.head.w"], params["decoder.head.b"])
    return ad.reshape(x, (config.image_size, config.image_size))
