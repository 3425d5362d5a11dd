"""Parameter initialisation.

Parameters live in a flat ``{name: Tensor}`` dict.  Everything under
``vit.`` is the frozen backbone stub; the rest (adapter, prompt encoders,
fusion, decoder) is trainable.
"""

from __future__ import annotations

import numpy as np

from ..autodiff import Tensor
from .config import ModelConfig

FROZEN_PREFIX = "vit."


class _Init:
    def __init__(self, seed: int):
        self.rng = np.random.default_rng(seed)
        self.params: dict[str, Tensor] = {}

    def uniform(self, name, shape, fan_in):
        bound = 1.0 / np.sqrt(fan_in)
        self.params[name] = Tensor(self.rng.uniform(-bound, bound, size=shape), name=name)

    def const(self, name, shape, value):
        self.params[name] = Tensor(np.full(shape, float(value)), name=name)

    def linear(self, name, d_in, d_out, bias=True):
        self.uniform(f"{name}.w", (d_in, d_out), d_in)
        if bias:
            self.uniform(f"{name}.b", (d_out,), d_in)

    def conv(self, name, c_in, c_out, k):
        self.uniform(f"{name}.w", (c_out, c_in, k, k), c_in * k * k)
        self.uniform(f"{name}.b", (c_out,), c_in * k * k)

    def norm(self, name, d):
        self.const(f"{name}.g", (d,), 1.0)
        self.const(f"{name}.b", (d,), 0.0)

    def attention(self, name, d):
        for proj in ("wq", "wk", "wv", "wo"):
            self.uniform(f"{name}.{proj}", (d, d), d)

    def block(self, name, d, mlp_ratio):
        self.norm(f"{name}.ln1", d)
        self.attention(f"{name}.attn", d)
        self.norm(f"{name}.ln2", d)
        self.linear(f"{name}.mlp1", d, d * mlp_ratio)
        self.linear(f"{name}.mlp2", d * mlp_ratio, d)


def decoder_channels(config: ModelConfig) -> list[int]:
    chans = [config.embed_dim]
    for _ in range(config.decoder_upsample_stages):
        chans.append(max(chans[-1] // 2, 8))
    return chans


def init_params(config: ModelConfig) -> dict[str, Tensor]:
    d, p = config.embed_dim, config.patch_size
    init = _Init(config.seed)

    init.linear("vit.patch", p * p, d)
    init.uniform("vit.pos", (config.tokens, d), d)
    for i in range(config.vit_depth):
        init.block(f"vit.blocks.{i}", d, config.mlp_ratio)

    hidden = d // config.adapter_reduction
    init.const("adapter.alpha", (1,), 0.0)
    init.uniform("adapter.dw.w", (d, 3, 3), 9)
    init.uniform("adapter.dw.b", (d,), 9)
    init.conv("adapter.pw1", d, hidden, 1)
    init.conv("adapter.pw2", hidden, d, 1)
    init.conv("adapter.spatial", d, d, 3)

    init.linear("sparse.coord", 2, d)
    init.uniform("sparse.type", (2, d), 1)

    first_stride = max(p // 2, 1)
    for stream in ("skel", "mask"):
        init.conv(f"dense.{stream}.c1", 1, max(d // 4, 1), first_stride)
        init.conv(f"dense.{stream}.c2", max(d // 4, 1), d, 2)

    init.linear("graph.in", 6, d)
    for layer in range(config.gcn_layers):
        init.uniform(f"graph.gcn.{layer}.w", (d, d), d)

    for stage in ("s1", "s2"):
        init.attention(f"fuse.{stage}.q2kv", d)
        init.attention(f"fuse.{stage}.kv2q", d)
        init.norm(f"fuse.{stage}.ln_q", d)
        init.norm(f"fuse.{stage}.ln_kv", d)

    for i in range(config.decoder_depth):
        init.block(f"decoder.blocks.{i}", d, config.mlp_ratio)
    chans = decoder_channels(config)
    for k in range(config.decoder_upsample_stages):
        init.conv(f"decoder.up.{k}", chans[k], chans[k + 1], 3)
    init.conv("decoder.head", chans[-1], 1, 1)

    params = init.params
    for name, t in params.items():
        t.requires_grad = not name.startswith(FROZEN_PREFIX)
    return params


def trainable(params: dict[str, Tensor]) -> dict[str, Tensor]:
    return {k: v for k, v in params.items() if v.requires_grad}


def frozen(params: dict[str, Tensor]) -> dict[str, Tensor]:
    return {k: v for k, v in params.items() if not v.requires_grad}


def params_from_arrays(arrays: dict[str, np.ndarray]) -> dict[str, Tensor]:
    out = {}
    for name in arrays:
        out[name] = Tensor(arrays[name], requires_grad=not name.startswith(FROZEN_PREFIX), name=name)
    return out


def count_params(params: dict[str, Tensor]) -> int:
    return int(sum(t.size for t in params.values()))
