"""Binary vessel masks, PGM/PNG I/O and pixel-neighbourhood helpers."""

from __future__ import annotations

import io
from typing import NamedTuple

import numpy as np
from PIL import Image
from scipy import ndimage

from .errors import MalformedHeader, OutOfBounds, TruncatedPayload, UnsupportedDepth

FOREGROUND_THRESHOLD = 128

# clockwise from north: N, NE, E, SE, S, SW, W, NW as (dy, dx)
NEIGHBOR_OFFSETS = ((-1, 0), (-1, 1), (0, 1), (1, 1), (1, 0), (1, -1), (0, -1), (-1, -1))


class Point(NamedTuple):
    x: int
    y: int

    def yx(self):
        return (self.y, self.x)


class BinaryMask:
    """Immutable width x height foreground raster.

    The pixels live in a read-only boolean array of shape (height, width);
    ``bits`` gives the row-major flat view.
    """

    __slots__ = ("_array",)

    def __init__(self, width: int, height: int, bits=None):
        if int(width) < 1 or int(height) < 1:
            raise ValueError(f"mask dimensions must be >= 1, got {width}x{height}")
        if bits is None:
            arr = np.zeros((height, width), dtype=bool)
        else:
            arr = np.asarray(bits).astype(bool, copy=True)
            if arr.size != width * height:
                raise ValueError(
                    f"bits has {arr.size} entries, expected {width}x{height}={width * height}"
                )
            arr = arr.reshape(height, width)
        arr.setflags(write=False)
        self._array = arr

    @classmethod
    def from_array(cls, array) -> "BinaryMask":
        array = np.asarray(array)
        if array.ndim != 2:
            raise ValueError("expected a 2-D array")
        return cls(array.shape[1], array.shape[0], array)

    @classmethod
    def empty(cls, width: int, height: int) -> "BinaryMask":
        return cls(width, height)

    @property
    def width(self) -> int:
        return self._array.shape[1]

    @property
    def height(self) -> int:
        return self._array.shape[0]

    @property
    def dims(self) -> tuple[int, int]:
        return (self.width, self.height)

    @property
    def array(self) -> np.ndarray:
        return self._array

    @property
    def bits(self) -> np.ndarray:
        return self._array.reshape(-1)

    def count(self) -> int:
        return int(self._array.sum())

    def __getitem__(self, p) -> bool:
        x, y = p
        return bool(self._array[y, x])

    def contains(self, p) -> bool:
        x, y = p
        return 0 <= x < self.width and 0 <= y < self.height

    def points(self) -> list[Point]:
        """Foreground pixels in (y, x) lexicographic order."""
        ys, xs = np.nonzero(self._array)
        return [Point(int(x), int(y)) for y, x in zip(ys, xs)]

    def __eq__(self, other):
        if not isinstance(other, BinaryMask):
            return NotImplemented
        return self._array.shape == other._array.shape and bool(
            np.array_equal(self._array, other._array)
        )

    def __hash__(self):
        return hash((self._array.shape, self._array.tobytes()))

    def __repr__(self):
        return f"BinaryMask({self.width}x{self.height}, {self.count()} fg)"


def _parse_pgm_header(data: bytes) -> tuple[int, int, int]:
    """Return (width, height, payload offset) of a P5 PGM."""
    fields = []
    i, n = 2, len(data)
    if n <= i or not data[i : i + 1].isspace():
        raise MalformedHeader("PGM header: magic must be followed by whitespace")
    while len(fields) < 3:
        while i < n and (data[i : i + 1].isspace() or data[i : i + 1] == b"#"):
            if data[i : i + 1] == b"#":
                while i < n and data[i : i + 1] != b"\n":
                    i += 1
            i += 1
        start = i
        while i < n and data[i : i + 1].isdigit():
            i += 1
        if start == i:
            raise MalformedHeader("PGM header: expected width, height and maxval")
        fields.append(int(data[start:i]))
    if i >= n or not data[i : i + 1].isspace():
        raise MalformedHeader("PGM header: missing whitespace after maxval")
    width, height, maxval = fields
    if width < 1 or height < 1:
        raise MalformedHeader(f"PGM header: bad dimensions {width}x{height}")
    if maxval != 255:
        raise UnsupportedDepth(f"PGM maxval {maxval} is not supported (need 255)")
    if n - (i + 1) < width * height:
        raise TruncatedPayload(f"PGM payload has {n - i - 1} bytes, expected {width * height}")
    return width, height, i + 1


def _pgm_pixels(data: bytes) -> np.ndarray:
    width, height, offset = _parse_pgm_header(data)
    return np.frombuffer(data, dtype=np.uint8, count=width * height, offset=offset).reshape(
        height, width
    )


def _load_png(data: bytes) -> BinaryMask:
    try:
        img = Image.open(io.BytesIO(data))
        img.load()
    except Exception as exc:  # PIL raises a zoo of types here
        if "truncated" in str(exc).lower():
            raise TruncatedPayload(f"PNG payload truncated: {exc}") from exc
        raise MalformedHeader(f"cannot decode PNG: {exc}") from exc
    if img.mode != "L":
        raise UnsupportedDepth(f"PNG mode {img.mode!r}; only 8-bit grayscale is supported")
    arr = np.asarray(img, dtype=np.uint8)
    return BinaryMask.from_array(arr >= FOREGROUND_THRESHOLD)


def load_mask(data: bytes) -> BinaryMask:
    """Decode a binary PGM (P5, maxval 255) or 8-bit grayscale PNG.

    Pixels >= 128 become foreground.
    """
    data = bytes(data)
    if data.startswith(b"P5"):
        return BinaryMask.from_array(_pgm_pixels(data) >= FOREGROUND_THRESHOLD)
    if data.startswith(b"\x89PNG\r\n\x1a\n"):
        return _load_png(data)
    raise MalformedHeader("unrecognised magic; expected P5 PGM or PNG")


def save_mask(mask: BinaryMask) -> bytes:
    header = b"P5\n%d %d\n255\n" % (mask.width, mask.height)
    return header + (mask.bits.astype(np.uint8) * 255).tobytes()


def save_gray(array) -> bytes:
    """Encode an (H, W) uint8 array as binary PGM."""
    array = np.asarray(array, dtype=np.uint8)
    h, w = array.shape
    return b"P5\n%d %d\n255\n" % (w, h) + array.tobytes()


def load_gray(data: bytes) -> np.ndarray:
    """Decode a P5 PGM into an (H, W) uint8 array without thresholding."""
    data = bytes(data)
    if not data.startswith(b"P5"):
        raise MalformedHeader("expected P5 PGM")
    return _pgm_pixels(data).copy()


def neighbors8(mask: BinaryMask, p) -> tuple[int, tuple[bool, ...]]:
    """Neighbour flags clockwise from north (out-of-bounds is background) and their sum."""
    x, y = p
    if not mask.contains((x, y)):
        raise OutOfBounds(f"point {(x, y)} outside {mask.width}x{mask.height} mask")
    arr = mask.array
    flags = []
    for dy, dx in NEIGHBOR_OFFSETS:
        yy, xx = y + dy, x + dx
        flags.append(bool(0 <= yy < mask.height and 0 <= xx < mask.width and arr[yy, xx]))
    return sum(flags), tuple(flags)


def neighbor_count_map(array: np.ndarray) -> np.ndarray:
    """Number of 8-neighbours that are foreground, for every pixel."""
    a = np.pad(np.asarray(array, dtype=np.int32), 1)
    h, w = array.shape
    total = np.zeros((h, w), dtype=np.int32)
    for dy, dx in NEIGHBOR_OFFSETS:
        total += a[1 + dy : 1 + dy + h, 1 + dx : 1 + dx + w]
    return total


_STRUCTURES = {
    4: ndimage.generate_binary_structure(2, 1),
    8: ndimage.generate_binary_structure(2, 2),
}


def connected_components(mask, connectivity: int = 8) -> tuple[np.ndarray, int]:
    """Label foreground components 1..k (background 0); returns (labels, k).

    Labels are assigned in raster order of each component's first pixel.
    """
    if connectivity not in _STRUCTURES:
        raise ValueError("connectivity must be 4 or 8")
    array = mask.array if isinstance(mask, BinaryMask) else np.asarray(mask, dtype=bool)
    labels, k = ndimage.label(array, structure=_STRUCTURES[connectivity])
    return labels.astype(np.int32), int(k)
