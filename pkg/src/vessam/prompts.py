"""Automatic multi-prompt generation from vessel masks.

A mask is thinned to its skeleton; skeleton pixels with three or more
8-neighbours are grouped into junction clusters whose representatives are
the bifurcation prompts; removing the clusters splits the skeleton into
branch segments whose middle pixels (with a local tangent) are the midpoint
prompts.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    BranchAmbiguity,
    InconsistentPromptSet,
    NotThin,
    PointOutOfBounds,
    SchemaViolation,
    VersionMismatch,
)
from .raster import NEIGHBOR_OFFSETS, BinaryMask, Point, connected_components, neighbor_count_map
from .skeleton import is_thin, skeletonize

FORMAT_VERSION = "1"


@dataclass(frozen=True)
class Segment:
    path: tuple[Point, ...]

    def __post_init__(self):
        if len(self.path) < 1:
            raise ValueError("segment path must contain at least one point")

    def __len__(self):
        return len(self.path)

    @property
    def start(self) -> Point:
        return self.path[0]

    @property
    def end(self) -> Point:
        return self.path[-1]


@dataclass(frozen=True)
class Midpoint:
    point: Point
    tangent: tuple[float, float]


@dataclass(frozen=True)
class JunctionCluster:
    representative: Point
    pixels: frozenset


@dataclass(frozen=True)
class PromptSet:
    bifurcations: tuple[Point, ...]
    midpoints: tuple[Midpoint, ...]
    skeleton: BinaryMask
    source_dims: tuple[int, int] = field(default=None)

    def __post_init__(self):
        if self.source_dims is None:
            object.__setattr__(self, "source_dims", self.skeleton.dims)
        object.__setattr__(self, "bifurcations", tuple(Point(*p) for p in self.bifurcations))
        object.__setattr__(self, "midpoints", tuple(self.midpoints))
        object.__setattr__(self, "source_dims", tuple(self.source_dims))
        if self.skeleton.dims != self.source_dims:
            raise InconsistentPromptSet(
                f"skeleton dims {self.skeleton.dims} differ from source dims {self.source_dims}"
            )

    def check_on_skeleton(self):
        for p in list(self.bifurcations) + [m.point for m in self.midpoints]:
            if not self.skeleton.contains(p) or not self.skeleton[p]:
                raise InconsistentPromptSet(f"prompt {tuple(p)} is not a skeleton pixel")


def _require_thin(skeleton: BinaryMask):
    if not is_thin(skeleton):
        raise NotThin("skeleton has a fully foreground 2x2 window")


def junction_mask(skeleton: BinaryMask) -> np.ndarray:
    a = skeleton.array
    return a & (neighbor_count_map(a) >= 3)


def _representative(pixels) -> Point:
    cy = sum(y for y, _ in pixels) / len(pixels)
    cx = sum(x for _, x in pixels) / len(pixels)
    y, x = min(pixels, key=lambda p: ((p[0] - cy) ** 2 + (p[1] - cx) ** 2, p[0], p[1]))
    return Point(int(x), int(y))


def junction_clusters(skeleton: BinaryMask) -> list[JunctionCluster]:
    """8-adjacent groups of junction pixels, sorted by representative (y, x)."""
    labels, k = connected_components(junction_mask(skeleton), 8)
    clusters = []
    for lab in range(1, k + 1):
        ys, xs = np.nonzero(labels == lab)
        pixels = [(int(y), int(x)) for y, x in zip(ys, xs)]
        clusters.append(JunctionCluster(_representative(pixels), frozenset(pixels)))
    clusters.sort(key=lambda c: c.representative.yx())
    return clusters


def detect_bifurcations(skeleton: BinaryMask) -> list[Point]:
    """One representative per junction cluster, sorted by (y, x).

    The representative is the cluster pixel nearest the cluster centroid,
    ties broken by the smallest (y, x).
    """
    _require_thin(skeleton)
    return [c.representative for c in junction_clusters(skeleton)]


def clusters_for(skeleton: BinaryMask, junctions) -> list[JunctionCluster]:
    by_pixel = {}
    for c in junction_clusters(skeleton):
        for px in c.pixels:
            by_pixel[px] = c
    chosen = {}
    for p in junctions:
        p = Point(*p)
        if not skeleton.contains(p) or not skeleton[p]:
            raise InconsistentPromptSet(f"junction {tuple(p)} is not a skeleton pixel")
        c = by_pixel.get(p.yx(), JunctionCluster(p, frozenset([p.yx()])))
        chosen[c.pixels] = c
    return sorted(chosen.values(), key=lambda c: c.representative.yx())


def _trace(pixels: set) -> list[tuple[int, int]]:
    def nbrs(p):
        y, x = p
        return sorted((y + dy, x + dx) for dy, dx in NEIGHBOR_OFFSETS if (y + dy, x + dx) in pixels)

    degree = {p: len(nbrs(p)) for p in pixels}
    bad = [p for p, d in degree.items() if d >= 3]
    if bad:
        y, x = min(bad)
        raise BranchAmbiguity(f"pixel {(x, y)} keeps {degree[(y, x)]} neighbours after junction removal")
    ends = sorted(p for p, d in degree.items() if d <= 1)
    start = ends[0] if ends else min(pixels)  # cycles are cut at their smallest pixel
    path = [start]
    seen = {start}
    while True:
        nxt = [q for q in nbrs(path[-1]) if q not in seen]
        if not nxt:
            break
        path.append(nxt[0])
        seen.add(nxt[0])
    if len(path) != len(pixels):
        raise BranchAmbiguity("segment component is not a simple path or cycle")
    return path


def decompose_segments(skeleton: BinaryMask, junctions) -> list[Segment]:
    """Split the skeleton into branch paths after deleting the junction clusters
    that contain ``junctions``.  Segments are sorted by starting point (y, x)."""
    _require_thin(skeleton)
    residual = skeleton.array.copy()
    for c in clusters_for(skeleton, junctions):
        for y, x in c.pixels:
            residual[y, x] = False
    labels, k = connected_components(residual, 8)
    segments = []
    for lab in range(1, k + 1):
        ys, xs = np.nonzero(labels == lab)
        path = _trace({(int(y), int(x)) for y, x in zip(ys, xs)})
        segments.append(Segment(tuple(Point(x, y) for y, x in path)))
    segments.sort(key=lambda s: s.start.yx())
    return segments


def segment_midpoint(segment: Segment) -> Midpoint:
    path = segment.path
    n = len(path)
    i = (n - 1) // 2
    if n == 1:
        return Midpoint(path[0], (0.0, 0.0))
    a, b = path[max(i - 1, 0)], path[min(i + 1, n - 1)]
    dx, dy = b.x - a.x, b.y - a.y
    norm = math.hypot(dx, dy)
    return Midpoint(path[i], (dx / norm, dy / norm))


def generate_prompt_set(mask: BinaryMask) -> PromptSet:
    skel = skeletonize(mask)
    bifs = detect_bifurcations(skel)
    segments = decompose_segments(skel, bifs)
    mids = [segment_midpoint(s) for s in segments]
    ps = PromptSet(tuple(bifs), tuple(mids), skel, mask.dims)
    ps.check_on_skeleton()
    return ps


# --- persistence -----------------------------------------------------------


def encode_rle(mask: BinaryMask) -> list[list[int]]:
    bits = mask.bits.astype(np.int8)
    edges = np.diff(np.concatenate([[0], bits, [0]]))
    starts = np.nonzero(edges == 1)[0]
    stops = np.nonzero(edges == -1)[0]
    return [[int(s), int(e - s)] for s, e in zip(starts, stops)]


def decode_rle(runs, width: int, height: int) -> BinaryMask:
    bits = np.zeros(width * height, dtype=bool)
    for run in runs:
        start, length = run
        if start < 0 or length < 1 or start + length > bits.size:
            raise SchemaViolation(f"RLE run {run} outside a {width}x{height} raster")
        bits[start : start + length] = True
    return BinaryMask(width, height, bits)


def prompt_set_to_dict(ps: PromptSet) -> dict:
    return {
        "version": FORMAT_VERSION,
        "dims": [ps.source_dims[0], ps.source_dims[1]],
        "bifurcations": [[p.x, p.y] for p in ps.bifurcations],
        "midpoints": [
            {"p": [m.point.x, m.point.y], "t": [float(m.tangent[0]), float(m.tangent[1])]}
            for m in ps.midpoints
        ],
        "skeleton_rle": encode_rle(ps.skeleton),
    }


def serialize_prompts(ps: PromptSet) -> bytes:
    return (json.dumps(prompt_set_to_dict(ps)) + "\n").encode("utf-8")


def _is_int(v) -> bool:
    return isinstance(v, int) and not isinstance(v, bool)


def _is_num(v) -> bool:
    return isinstance(v, (int, float)) and not isinstance(v, bool) and math.isfinite(v)


def _pair(v, check, what) -> tuple:
    if not isinstance(v, list) or len(v) != 2 or not all(check(c) for c in v):
        raise SchemaViolation(f"{what} must be a 2-element list, got {v!r}")
    return tuple(v)


def _point(v, dims, what) -> Point:
    x, y = _pair(v, _is_int, what)
    if not (0 <= x < dims[0] and 0 <= y < dims[1]):
        raise PointOutOfBounds(f"{what} {v} outside {dims[0]}x{dims[1]}")
    return Point(x, y)


def prompt_set_from_dict(doc) -> PromptSet:
    if not isinstance(doc, dict):
        raise SchemaViolation("prompt document must be a JSON object")
    for key in ("version", "dims", "bifurcations", "midpoints", "skeleton_rle"):
        if key not in doc:
            raise SchemaViolation(f"missing field {key!r}")
    if not isinstance(doc["version"], str):
        raise SchemaViolation("version must be a string")
    if doc["version"] != FORMAT_VERSION:
        raise VersionMismatch(f"unsupported prompt format version {doc['version']!r}")
    dims = _pair(doc["dims"], _is_int, "dims")
    if dims[0] < 1 or dims[1] < 1:
        raise SchemaViolation(f"dims must be positive, got {list(dims)}")
    if not isinstance(doc["bifurcations"], list) or not isinstance(doc["midpoints"], list):
        raise SchemaViolation("bifurcations and midpoints must be lists")
    bifs = tuple(_point(p, dims, "bifurcation") for p in doc["bifurcations"])
    mids = []
    for m in doc["midpoints"]:
        if not isinstance(m, dict) or "p" not in m or "t" not in m:
            raise SchemaViolation(f"midpoint entry must have 'p' and 't': {m!r}")
        t = _pair(m["t"], _is_num, "tangent")
        mids.append(Midpoint(_point(m["p"], dims, "midpoint"), (float(t[0]), float(t[1]))))
    runs = doc["skeleton_rle"]
    if not isinstance(runs, list):
        raise SchemaViolation("skeleton_rle must be a list")
    runs = [_pair(r, _is_int, "RLE run") for r in runs]
    skeleton = decode_rle(runs, dims[0], dims[1])
    return PromptSet(bifs, tuple(mids), skeleton, dims)


def deserialize_prompts(data: bytes) -> PromptSet:
    try:
        doc = json.loads(bytes(data).decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise SchemaViolation(f"not a JSON document: {exc}") from exc
    return prompt_set_from_dict(doc)
