"""End-to-end forward pass with prompt-type ablation flags."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..autodiff import Tensor
from ..prompts import PromptSet
from ..topology import Node, NodeKind, VesselGraph, build_graph
from ..raster import Point
from .config import ModelConfig
from .decoder import decode
from .encoder import adapter_forward, vit_stub_forward
from .prompt_encoder import FeatureSet, encode_dense, encode_graph, encode_sparse, fuse_prompts


@dataclass(frozen=True)
class PromptFlags:
    use_bif: bool = True
    use_mid: bool = True
    use_skel: bool = True

    @property
    def names(self) -> list[str]:
        return [n for n, on in (("bif", self.use_bif), ("mid", self.use_mid), ("skel", self.use_skel)) if on]

    @classmethod
    def from_names(cls, names) -> "PromptFlags":
        names = set(names)
        unknown = names - {"bif", "mid", "skel"}
        if unknown:
            raise ValueError(f"unknown prompt types {sorted(unknown)}")
        return cls("bif" in names, "mid" in names, "skel" in names)

    def __str__(self):
        return "+".join(self.names) or "none"


ALL_PROMPTS = PromptFlags()

_DUMMY_GRAPH = VesselGraph((Node(Point(0, 0), NodeKind.BIFURCATION),), ())


@dataclass
class ModelOutput:
    logits: Tensor
    features: FeatureSet
    image_tokens: Tensor


def restrict_graph(g: VesselGraph, flags: PromptFlags) -> VesselGraph:
    keep = [
        i for i, node in enumerate(g.nodes)
        if (node.kind is NodeKind.BIFURCATION and flags.use_bif)
        or (node.kind is NodeKind.MIDPOINT and flags.use_mid)
    ]
    return g.subgraph(keep)


def run_model(
    image,
    prompt_set: PromptSet,
    graph: VesselGraph | None,
    params,
    config: ModelConfig,
    flags: PromptFlags = ALL_PROMPTS,
    mask_prior=None,
) -> ModelOutput:
    tokens = adapter_forward(vit_stub_forward(image, params, config), params)

    bifs = prompt_set.bifurcations if flags.use_bif else ()
    mids = prompt_set.midpoints if flags.use_mid else ()
    sparse = encode_sparse(bifs, mids, config, params)
    skeleton = prompt_set.skeleton if flags.use_skel else None
    dense = encode_dense(skeleton, mask_prior, config, params)

    if graph is None:
        graph = build_graph(prompt_set)
    sub = restrict_graph(graph, flags)
    if sub.n == 0:
        graph_feats = encode_graph(_DUMMY_GRAPH, config, params, features=np.zeros((1, 6)))
    else:
        graph_feats = encode_graph(sub, config, params)

    fs = fuse_prompts(FeatureSet(sparse, dense, graph_feats), params, config.heads)
    return ModelOutput(decode(tokens, fs, params, config), fs, tokens)


def forward(image, prompt_set, graph, params, config: ModelConfig, flags: PromptFlags = ALL_PROMPTS,
            mask_prior=None) -> Tensor:
    """(H, W) logits for one image and its prompts."""
    return run_model(image, prompt_set, graph, params, config, flags, mask_prior).logits
