"""Zhang-Suen thinning producing 1-pixel-wide, topology-preserving skeletons.

Plain parallel Zhang-Suen has two well known defects: it erases isolated
2x2 blocks (and some 2-pixel-thick diagonals) outright, and it leaves
4-connected "staircase" corners whose pixels look like junctions to an
8-neighbour count.  Both are handled here:

* every parallel sub-iteration is checked with an 8-connected component
  count; if the count would change, that sub-iteration is redone
  sequentially in raster order, re-testing the deletion rule on the
  updated image (each single deletion is then a simple-point deletion);
* once the parallel sweeps stop changing anything, redundant corner pixels
  (8-simple, not endpoints, inside a 2x2 window with >= 3 foreground pixels)
  are removed sequentially, and the sweeps resume;
* a 2x2 block whose four pixels are all cut points (two diagonal strokes
  crossing, one arm leaving each corner) cannot be thinned by deletion.
  Such a block is re-routed through the mask: one block pixel is dropped
  and one nearby mask pixel added, provided the component count is kept
  and the number of full 2x2 windows strictly drops.

The result is an 8-minimal skeleton.  It has no fully-foreground 2x2
window unless the mask itself leaves no room to re-route a crossing.
"""

from __future__ import annotations

import numpy as np

from .errors import InternalLimit
from .raster import BinaryMask, connected_components


def _ring(padded: np.ndarray):
    """P2..P9 neighbour planes (N, NE, E, SE, S, SW, W, NW) of a 1-padded array."""
    h, w = padded.shape[0] - 2, padded.shape[1] - 2

    def at(dy, dx):
        return padded[1 + dy : 1 + dy + h, 1 + dx : 1 + dx + w]

    return [at(-1, 0), at(-1, 1), at(0, 1), at(1, 1), at(1, 0), at(1, -1), at(0, -1), at(-1, -1)]


def _zs_candidates(img: np.ndarray, first: bool) -> np.ndarray:
    p = np.pad(img, 1).astype(np.uint8)
    P2, P3, P4, P5, P6, P7, P8, P9 = _ring(p)
    ring = (P2, P3, P4, P5, P6, P7, P8, P9, P2)
    B = P2.astype(np.int32) + P3 + P4 + P5 + P6 + P7 + P8 + P9
    A = np.zeros(img.shape, dtype=np.int32)
    for a, b in zip(ring[:-1], ring[1:]):
        A += (a == 0) & (b == 1)
    cond = img & (B >= 2) & (B <= 6) & (A == 1)
    if first:
        cond &= (P2 * P4 * P6 == 0) & (P4 * P6 * P8 == 0)
    else:
        cond &= (P2 * P4 * P8 == 0) & (P2 * P6 * P8 == 0)
    return cond


def _local(img: np.ndarray, y: int, x: int) -> list[int]:
    h, w = img.shape
    out = []
    for dy, dx in ((-1, 0), (-1, 1), (0, 1), (1, 1), (1, 0), (1, -1), (0, -1), (-1, -1)):
        yy, xx = y + dy, x + dx
        out.append(int(0 <= yy < h and 0 <= xx < w and img[yy, xx]))
    return out


def _zs_deletable(img: np.ndarray, y: int, x: int, first: bool) -> bool:
    P2, P3, P4, P5, P6, P7, P8, P9 = ring = _local(img, y, x)
    B = sum(ring)
    if not 2 <= B <= 6:
        return False
    A = sum(1 for a, b in zip(ring, ring[1:] + ring[:1]) if a == 0 and b == 1)
    if A != 1:
        return False
    if first:
        return P2 * P4 * P6 == 0 and P4 * P6 * P8 == 0
    return P2 * P4 * P8 == 0 and P2 * P6 * P8 == 0


def _subiteration(img: np.ndarray, first: bool) -> int:
    cand = _zs_candidates(img, first)
    n = int(cand.sum())
    if n == 0:
        return 0
    trial = img & ~cand
    if connected_components(trial, 8)[1] == connected_components(img, 8)[1]:
        img[...] = trial
        return n
    deleted = 0
    for y, x in zip(*np.nonzero(cand)):
        if _zs_deletable(img, y, x, first):
            img[y, x] = False
            deleted += 1
    return deleted


def _yokoi8(ring: list[int]) -> int:
    # ring is N, NE, E, SE, S, SW, W, NW; Yokoi wants E, NE, N, NW, W, SW, S, SE
    N, NE, E, SE, S, SW, W, NW = (1 - v for v in ring)
    seq = (E, NE, N, NW, W, SW, S, SE, E, NE)
    return sum(seq[k] - seq[k] * seq[k + 1] * seq[k + 2] for k in (0, 2, 4, 6))


def _in_dense_window(img: np.ndarray, y: int, x: int) -> bool:
    h, w = img.shape
    for oy in (-1, 0):
        for ox in (-1, 0):
            y0, x0 = y + oy, x + ox
            if y0 < 0 or x0 < 0 or y0 + 1 >= h or x0 + 1 >= w:
                continue
            if img[y0 : y0 + 2, x0 : x0 + 2].sum() >= 3:
                return True
    return False


def _corner_candidates(img: np.ndarray) -> np.ndarray:
    p = np.pad(img, 1).astype(np.int32)
    h, w = img.shape
    window = p[:-1, :-1] + p[1:, :-1] + p[:-1, 1:] + p[1:, 1:]  # (h+1, w+1) 2x2 sums
    dense = window >= 3
    touches = dense[:-1, :-1] | dense[1:, :-1] | dense[:-1, 1:] | dense[1:, 1:]
    return img & touches[:h, :w]


def _remove_corners(img: np.ndarray) -> int:
    deleted = 0
    for y, x in zip(*np.nonzero(_corner_candidates(img))):
        if not img[y, x]:
            continue
        ring = _local(img, y, x)
        if sum(ring) >= 2 and _yokoi8(ring) == 1 and _in_dense_window(img, y, x):
            img[y, x] = False
            deleted += 1
    return deleted


def _full_windows(img: np.ndarray) -> np.ndarray:
    return img[:-1, :-1] & img[1:, :-1] & img[:-1, 1:] & img[1:, 1:]


def _reroute_blocks(img: np.ndarray, allowed: np.ndarray) -> int:
    """Swap one pixel of each stuck 2x2 block for a neighbouring ``allowed`` pixel."""
    h, w = img.shape
    swaps = 0
    for y, x in zip(*np.nonzero(_full_windows(img))):
        if not _full_windows(img[y : y + 2, x : x + 2]).all():
            continue  # already resolved by an earlier swap
        before_windows = int(_full_windows(img).sum())
        before_k = connected_components(img, 8)[1]
        done = False
        for py, px in ((y, x), (y, x + 1), (y + 1, x), (y + 1, x + 1)):
            for qy in range(max(y - 1, 0), min(y + 3, h)):
                for qx in range(max(x - 1, 0), min(x + 3, w)):
                    if img[qy, qx] or not allowed[qy, qx]:
                        continue
                    img[py, px], img[qy, qx] = False, True
                    if (int(_full_windows(img).sum()) < before_windows
                            and connected_components(img, 8)[1] == before_k):
                        done = True
                        break
                    img[py, px], img[qy, qx] = True, False
                if done:
                    break
            if done:
                break
        swaps += done
    return swaps


def skeletonize(mask: BinaryMask) -> BinaryMask:
    """Thin ``mask`` to a deterministic 1-pixel-wide skeleton with the same
    8-connected component count."""
    img = mask.array.copy()
    limit = mask.width + mask.height
    sweeps = 0
    while True:
        while True:
            sweeps += 1
            if sweeps > limit:
                raise InternalLimit(f"thinning did not converge within {limit} sweeps")
            changed = _subiteration(img, True) + _subiteration(img, False)
            if changed == 0:
                break
        if _remove_corners(img) == 0 and _reroute_blocks(img, mask.array) == 0:
            break
    return BinaryMask.from_array(img)


def is_thin(mask: BinaryMask) -> bool:
    """True iff no 2x2 window is entirely foreground."""
    a = mask.array
    if a.shape[0] < 2 or a.shape[1] < 2:
        return True
    return not bool(np.any(a[:-1, :-1] & a[1:, :-1] & a[:-1, 1:] & a[1:, 1:]))
