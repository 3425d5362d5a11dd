"""Vessel graph over bifurcation and midpoint prompts."""

from __future__ import annotations

import json
from dataclasses import dataclass
from enum import Enum

import numpy as np

from .errors import EmptyGraph, InconsistentPromptSet, SchemaViolation
from .prompts import PromptSet, clusters_for, decompose_segments, segment_midpoint
from .raster import NEIGHBOR_OFFSETS, Point


class NodeKind(str, Enum):
    BIFURCATION = "bifurcation"
    MIDPOINT = "midpoint"


@dataclass(frozen=True)
class Node:
    point: Point
    kind: NodeKind
    tangent: tuple[float, float] | None = None


@dataclass(frozen=True)
class VesselGraph:
    nodes: tuple[Node, ...]
    edges: tuple[tuple[int, int], ...]

    def __post_init__(self):
        n = len(self.nodes)
        seen = set()
        for i, j in self.edges:
            if not (0 <= i < j < n):
                raise ValueError(f"edge {(i, j)} invalid for {n} nodes (need 0 <= i < j < n)")
            if (i, j) in seen:
                raise ValueError(f"duplicate edge {(i, j)}")
            seen.add((i, j))

    @property
    def n(self) -> int:
        return len(self.nodes)

    def degree(self, i: int) -> int:
        return sum(i in e for e in self.edges)

    def adjacency(self) -> np.ndarray:
        a = np.zeros((self.n, self.n))
        for i, j in self.edges:
            a[i, j] = a[j, i] = 1.0
        return a

    def subgraph(self, keep) -> "VesselGraph":
        """Induced subgraph on the node indices in ``keep`` (order preserved)."""
        keep = sorted(keep)
        remap = {old: new for new, old in enumerate(keep)}
        edges = tuple(
            (remap[i], remap[j]) for i, j in self.edges if i in remap and j in remap
        )
        return VesselGraph(tuple(self.nodes[i] for i in keep), edges)

    def permuted(self, perm) -> "VesselGraph":
        """Graph whose node k is old node perm[k]."""
        inv = {old: new for new, old in enumerate(perm)}
        edges = sorted(tuple(sorted((inv[i], inv[j]))) for i, j in self.edges)
        return VesselGraph(tuple(self.nodes[p] for p in perm), tuple(edges))


def _touches(p: Point, pixels) -> bool:
    return any((p.y + dy, p.x + dx) in pixels for dy, dx in NEIGHBOR_OFFSETS)


def build_graph(ps: PromptSet) -> VesselGraph:
    """Nodes: bifurcations then midpoints, each sorted by (y, x).  Each
    segment's midpoint is joined to every junction cluster touching one of
    the segment's two extremities."""
    ps.check_on_skeleton()
    clusters = clusters_for(ps.skeleton, ps.bifurcations)
    if sorted(c.representative.yx() for c in clusters) != sorted(p.yx() for p in ps.bifurcations):
        raise InconsistentPromptSet("bifurcations do not match the skeleton's junction clusters")
    segments = decompose_segments(ps.skeleton, ps.bifurcations)
    computed = sorted((segment_midpoint(s).point.yx(), s) for s in segments)
    given = sorted(m.point.yx() for m in ps.midpoints)
    if [c[0] for c in computed] != given:
        raise InconsistentPromptSet("midpoints do not match the skeleton's segments")

    bif_nodes = sorted(ps.bifurcations, key=Point.yx)
    mids = sorted(ps.midpoints, key=lambda m: m.point.yx())
    nodes = [Node(p, NodeKind.BIFURCATION) for p in bif_nodes]
    nodes += [Node(m.point, NodeKind.MIDPOINT, tuple(m.tangent)) for m in mids]
    cluster_index = {c.representative.yx(): bif_nodes.index(c.representative) for c in clusters}

    edges = set()
    for k, (_, seg) in enumerate(computed):
        mid_idx = len(bif_nodes) + k
        for c in clusters:
            if _touches(seg.start, c.pixels) or _touches(seg.end, c.pixels):
                i = cluster_index[c.representative.yx()]
                edges.add((min(i, mid_idx), max(i, mid_idx)))
    return VesselGraph(tuple(nodes), tuple(sorted(edges)))


def normalized_adjacency(g: VesselGraph) -> np.ndarray:
    """D^-1/2 (A + I) D^-1/2 with D the degree matrix of A + I."""
    if g.n == 0:
        raise EmptyGraph("graph has no nodes")
    a = g.adjacency() + np.eye(g.n)
    inv_sqrt = 1.0 / np.sqrt(a.sum(axis=1))
    return inv_sqrt[:, None] * a * inv_sqrt[None, :]


def graph_to_dict(g: VesselGraph) -> dict:
    nodes = []
    for node in g.nodes:
        entry = {"p": [node.point.x, node.point.y], "kind": node.kind.value}
        if node.tangent is not None:
            entry["t"] = [float(node.tangent[0]), float(node.tangent[1])]
        nodes.append(entry)
    return {"nodes": nodes, "edges": [[i, j] for i, j in g.edges]}


def graph_to_json(g: VesselGraph) -> bytes:
    return (json.dumps(graph_to_dict(g)) + "\n").encode("utf-8")


def graph_from_dict(doc) -> VesselGraph:
    try:
        nodes = []
        for entry in doc["nodes"]:
            t = entry.get("t")
            nodes.append(Node(
                Point(int(entry["p"][0]), int(entry["p"][1])),
                NodeKind(entry["kind"]),
                None if t is None else (float(t[0]), float(t[1])),
            ))
        edges = tuple((int(i), int(j)) for i, j in doc["edges"])
        return VesselGraph(tuple(nodes), edges)
    except (KeyError, TypeError, ValueError, IndexError) as exc:
        raise SchemaViolation(f"malformed graph document: {exc}") from exc


def graph_from_json(data: bytes) -> VesselGraph:
    try:
        doc = json.loads(bytes(data).decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise SchemaViolation(f"not a JSON document: {exc}") from exc
    return graph_from_dict(doc)


def graph_to_dot(g: VesselGraph) -> str:
    lines = ["graph vessel {"]
    for i, node in enumerate(g.nodes):
        shape = "box" if node.kind is NodeKind.BIFURCATION else "ellipse"
        lines.append(f'  n{i} [label="{node.point.x},{node.point.y}", shape={shape}];')
    for i, j in g.edges:
        lines.append(f"  n{i} -- n{j};")
    lines.append("}")
    return "\n".join(lines) + "\n"
