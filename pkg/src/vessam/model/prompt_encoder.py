"""Multi-prompt encoder: sparse points, dense maps, vessel graph, and the
two-stage bidirectional cross-attention that fuses them."""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .. import autodiff as ad
from ..autodiff import Tensor
from ..errors import EmptyGraph, EmptySequence, PointOutOfBounds, ShapeMismatch
from ..raster import BinaryMask
from ..topology import NodeKind, VesselGraph, normalized_adjacency
from .config import ModelConfig
from .layers import attention, linear, map_to_tokens, norm

BIFURCATION, MIDPOINT = 0, 1


@dataclass(frozen=True)
class FeatureSet:
    """Prompt features before fusion and their fused counterparts.

    ``sparse_fused`` / ``dense_stage1`` come out of stage 1 (sparse x dense),
    ``dense_fused`` / ``graph_fused`` out of stage 2 (dense x graph).
    """

    sparse: Tensor
    dense: Tensor
    graph: Tensor
    sparse_fused: Tensor | None = None
    dense_stage1: Tensor | None = None
    dense_fused: Tensor | None = None
    graph_fused: Tensor | None = None


def _points_array(points, width, height) -> np.ndarray:
    pts = np.array([(p[0], p[1]) for p in points], dtype=np.float64).reshape(-1, 2)
    if pts.size and (
        (pts[:, 0] < 0).any() or (pts[:, 0] >= width).any()
        or (pts[:, 1] < 0).any() or (pts[:, 1] >= height).any()
    ):
        raise PointOutOfBounds(f"prompt point outside {width}x{height} image")
    return pts


def encode_sparse(bifurcations, midpoints, config: ModelConfig, params) -> Tensor:
    """One row per point: linear(x/W, y/H) + type embedding; bifurcations first.

    ``midpoints`` may hold Midpoint objects or bare points.
    """
    size = config.image_size
    mids = [getattr(m, "point", m) for m in midpoints]
    pts = _points_array(list(bifurcations) + mids, size, size)
    kinds = [BIFURCATION] * len(bifurcations) + [MIDPOINT] * len(mids)
    if not kinds:
        return Tensor(np.zeros((0, config.embed_dim)))
    coords = Tensor(pts / size)
    emb = linear(coords, params, "sparse.coord")
    return ad.add(emb, ad.gather_rows(params["sparse.type"], kinds))


def _mask_tensor(mask, size) -> Tensor:
    if mask is None:
        return Tensor(np.zeros((1, size, size)))
    arr = mask.array if isinstance(mask, BinaryMask) else np.asarray(mask)
    if arr.shape != (size, size):
        raise ShapeMismatch(f"dense prompt shape {arr.shape} != ({size}, {size})")
    return Tensor(arr.astype(np.float64)[None])


def _dense_stream(x: Tensor, params, name: str, config: ModelConfig) -> Tensor:
    s1 = max(config.patch_size // 2, 1)
    h = ad.relu(ad.conv2d(x, params[f"{name}.c1.w"], params[f"{name}.c1.b"], stride=s1))
    h = ad.conv2d(h, params[f"{name}.c2.w"], params[f"{name}.c2.b"], stride=2)
    return map_to_tokens(h)


def encode_dense(skeleton, mask_prior, config: ModelConfig, params) -> Tensor:
    """Skeleton and mask prior through independent two-layer strided conv
    encoders to the token grid; the two token sets are summed.  ``None``
    stands for an all-zero map."""
    size = config.image_size
    skel = _dense_stream(_mask_tensor(skeleton, size), params, "dense.skel", config)
    prior = _dense_stream(_mask_tensor(mask_prior, size), params, "dense.mask", config)
    return ad.add(skel, prior)


def node_features(g: VesselGraph, config: ModelConfig) -> np.ndarray:
    """[x/W, y/H, is_bifurcation, is_midpoint, tx, ty] per node."""
    size = config.image_size
    feats = np.zeros((g.n, 6))
    for i, node in enumerate(g.nodes):
        feats[i, 0] = node.point.x / size
        feats[i, 1] = node.point.y / size
        feats[i, 2 if node.kind is NodeKind.BIFURCATION else 3] = 1.0
        if node.tangent is not None:
            feats[i, 4:6] = node.tangent
    return feats


def encode_graph(g: VesselGraph, config: ModelConfig, params, features: np.ndarray | None = None) -> Tensor:
    """Embed node features, then ``gcn_layers`` rounds of relu(A_hat H W)."""
    if g.n == 0:
        raise EmptyGraph("graph encoder needs at least one node")
    feats = node_features(g, config) if features is None else features
    a_hat = Tensor(normalized_adjacency(g))
    h = linear(Tensor(feats), params, "graph.in")
    for layer in range(config.gcn_layers):
        h = ad.relu(ad.matmul(a_hat, ad.matmul(h, params[f"graph.gcn.{layer}.w"])))
    return h


def cross_attention(q_seq: Tensor, kv_seq: Tensor, params, name: str, heads: int):
    """Bidirectional cross-attention.

    updated_q = LN(q + MHA(q -> kv)); updated_kv = LN(kv + MHA(kv -> updated_q)).
    """
    if q_seq.shape[0] == 0 or kv_seq.shape[0] == 0:
        raise EmptySequence("cross-attention needs non-empty query and key/value sequences")
    q = norm(ad.add(q_seq, attention(q_seq, kv_seq, params, f"{name}.q2kv", heads)), params, f"{name}.ln_q")
    kv = norm(ad.add(kv_seq, attention(kv_seq, q, params, f"{name}.kv2q", heads)), params, f"{name}.ln_kv")
    return q, kv


def fuse_prompts(fs: FeatureSet, params, heads: int) -> FeatureSet:
    """Stage 1 fuses sparse with dense; stage 2 lets the updated dense
    tokens (as queries) interact with the graph features."""
    if fs.sparse.shape[0] == 0:
        sparse_fused, dense1 = fs.sparse, fs.dense
    else:
        sparse_fused, dense1 = cross_attention(fs.sparse, fs.dense, params, "fuse.s1", heads)
    dense2, graph_fused = cross_attention(dense1, fs.graph, params, "fuse.s2", heads)
    return replace(
        fs,
        sparse_fused=sparse_fused,
        dense_stage1=dense1,
        dense_fused=dense2,
        graph_fused=graph_fused,
    )
