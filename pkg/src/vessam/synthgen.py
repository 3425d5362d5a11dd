"""Procedural branching vessel masks with known topology.

The random walk runs in 16.16 fixed point with headings quantised to 1/256
turn and an integer-only generator stream, so a given TreeSpec produces the
same raster on every platform.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np

from .errors import DegenerateSpec
from .raster import BinaryMask, Point

FP_SHIFT = 16
FP_ONE = 1 << FP_SHIFT
TURN = 256

# rounded to 16 fractional bits, far coarser than any libm ulp differences
_COS = tuple(int(round(math.cos(2 * math.pi * k / TURN) * FP_ONE)) for k in range(TURN))
_SIN = tuple(int(round(math.sin(2 * math.pi * k / TURN) * FP_ONE)) for k in range(TURN))


@dataclass(frozen=True)
class TreeSpec:
    seed: int
    size: int = 64
    branch_events: int = 2
    width_px: int = 2
    wiggle: float = 0.5

    def __post_init__(self):
        if self.size < 16:
            raise DegenerateSpec(f"size must be >= 16, got {self.size}")
        if not 1 <= self.width_px <= 5:
            raise DegenerateSpec(f"width_px must be in 1..5, got {self.width_px}")
        if self.branch_events < 0:
            raise DegenerateSpec("branch_events must be >= 0")
        if not 0.0 <= self.wiggle <= 1.0:
            raise DegenerateSpec(f"wiggle must be in [0, 1], got {self.wiggle}")


@dataclass(frozen=True)
class TreeTruth:
    branch_points: tuple[Point, ...]
    centerline: BinaryMask


def _disk_offsets(width: int):
    c = width - 1
    return [
        (i - c // 2, j - c // 2)
        for i in range(width)
        for j in range(width)
        if (2 * i - c) ** 2 + (2 * j - c) ** 2 <= width * width + 1
    ]


def _fp_round(v: int) -> int:
    return (v + FP_ONE // 2) >> FP_SHIFT


class _Walker:
    def __init__(self, spec: TreeSpec, rng: np.random.Generator):
        self.spec = spec
        self.rng = rng
        self.lo = (spec.width_px + 2) * FP_ONE
        self.hi = (spec.size - 1 - spec.width_px - 2) * FP_ONE
        self.centre = (spec.size // 2) * FP_ONE
        self.jitter = int(round(spec.wiggle * 4))
        self.centerline = np.zeros((spec.size, spec.size), dtype=bool)

    def _toward_centre(self, x, y, heading):
        # smallest quantised heading change that points more inward
        best = heading
        best_dot = None
        for delta in (-12, 12):
            h = (heading + delta) % TURN
            dot = (self.centre - x) * _COS[h] + (self.centre - y) * _SIN[h]
            if best_dot is None or dot > best_dot:
                best, best_dot = h, dot
        return best

    def walk(self, x, y, heading, steps):
        for _ in range(steps):
            if self.jitter:
                heading = (heading + int(self.rng.integers(-self.jitter, self.jitter + 1))) % TURN
            nx, ny = x + _COS[heading], y + _SIN[heading]
            if not (self.lo <= nx <= self.hi and self.lo <= ny <= self.hi):
                heading = self._toward_centre(x, y, heading)
                nx, ny = x + _COS[heading], y + _SIN[heading]
                nx = min(max(nx, self.lo), self.hi)
                ny = min(max(ny, self.lo), self.hi)
            x, y = nx, ny
            self.centerline[_fp_round(y), _fp_round(x)] = True
        return x, y, heading


def _tree_shape(spec: TreeSpec, rng):
    # children[i] is empty for leaves; node 0 is the trunk
    children = [[]]
    for _ in range(spec.branch_events):
        leaves = [i for i, c in enumerate(children) if not c]
        leaf = leaves[int(rng.integers(0, len(leaves)))]
        children[leaf] = [len(children), len(children) + 1]
        children += [[], []]
    return children


def generate_vessel_tree(spec: TreeSpec) -> tuple[BinaryMask, TreeTruth]:
    rng = np.random.default_rng(spec.seed)
    size = spec.size
    children = _tree_shape(spec, rng)
    walker = _Walker(spec, rng)

    side = int(rng.integers(0, 4))
    along = int(rng.integers(size // 4, 3 * size // 4)) * FP_ONE
    lo, hi = walker.lo, walker.hi
    x, y, heading = [
        (along, lo, TURN // 4),  # top edge, heading down
        (hi, along, TURN // 2),  # right edge, heading left
        (along, hi, 3 * TURN // 4),  # bottom edge, heading up
        (lo, along, 0),  # left edge, heading right
    ][side]
    walker.centerline[_fp_round(y), _fp_round(x)] = True

    branch_points = []
    stack = [(0, x, y, heading)]
    while stack:
        node, x, y, heading = stack.pop()
        if node == 0:
            length = int(rng.integers(size // 3, size // 2 + 1))
        else:
            length = int(rng.integers(size // 6, size // 3 + 1))
        x, y, heading = walker.walk(x, y, heading, length)
        if children[node]:
            branch_points.append(Point(_fp_round(x), _fp_round(y)))
            spread = int(rng.integers(18, 30))
            left, right = children[node]
            stack.append((right, x, y, (heading + spread) % TURN))
            stack.append((left, x, y, (heading - spread) % TURN))

    centerline = walker.centerline
    if centerline.sum() < 2:
        raise DegenerateSpec("tree did not grow inside the canvas")
    mask = np.zeros_like(centerline)
    ys, xs = np.nonzero(centerline)
    for dy, dx in _disk_offsets(spec.width_px):
        yy, xx = ys + dy, xs + dx
        ok = (yy >= 0) & (yy < size) & (xx >= 0) & (xx < size)
        mask[yy[ok], xx[ok]] = True
    truth = TreeTruth(tuple(sorted(branch_points, key=Point.yx)), BinaryMask.from_array(centerline))
    return BinaryMask.from_array(mask), truth


def render_image(mask: BinaryMask, seed: int, contrast: float = 0.25, noise: float = 0.2) -> np.ndarray:
    """Toy angiogram: vessels brighter than background by ``contrast`` under
    additive Gaussian noise, clipped to [0, 1].  Returns an (H, W) float array."""
    rng = np.random.default_rng(seed)
    base = 0.5 - contrast / 2 + contrast * mask.array.astype(np.float64)
    return np.clip(base + rng.normal(0.0, noise, size=base.shape), 0.0, 1.0)


def random_spec(rng: np.random.Generator, size_range=(64, 128), branches=(0, 6), widths=(1, 3)) -> TreeSpec:
    return TreeSpec(
        seed=int(rng.integers(0, 2**63 - 1)),
        size=int(rng.integers(size_range[0], size_range[1] + 1)),
        branch_events=int(rng.integers(branches[0], branches[1] + 1)),
        width_px=int(rng.integers(widths[0], widths[1] + 1)),
        wiggle=int(rng.integers(0, 257)) / 256,
    )


def indexed_spec(seed: int, index: int, size: int = 64, branches: int = 2, widths=(1, 3)) -> TreeSpec:
    """The ``index``-th spec of a batch seeded by ``seed``; independent of batch size."""
    rng = np.random.default_rng([seed & (2**64 - 1), index])
    return TreeSpec(
        seed=int(rng.integers(0, 2**63 - 1)),
        size=size,
        branch_events=branches,
        width_px=int(rng.integers(widths[0], widths[1] + 1)),
        wiggle=int(rng.integers(0, 257)) / 256,
    )


def truth_to_json(truth: TreeTruth) -> str:
    return json.dumps({"branch_points": [[p.x, p.y] for p in truth.branch_points]}) + "\n"
