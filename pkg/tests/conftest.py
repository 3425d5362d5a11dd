import numpy as np
import pytest
from hypothesis import settings

from vessam.raster import BinaryMask

settings.register_profile("repo", deadline=None, max_examples=60, derandomize=True)
settings.load_profile("repo")


def mask_from_rows(*rows: str) -> BinaryMask:
    """'#' is foreground, anything else background."""
    return BinaryMask.from_array(np.array([[c == "#" for c in r] for r in rows]))


def plus_mask(arm: int = 2, pad: int = 1, thickness: int = 1) -> BinaryMask:
    side = 2 * arm + 1 + 2 * pad
    a = np.zeros((side, side), bool)
    c = side // 2
    h = thickness // 2
    a[c - h : c + h + 1, pad : side - pad] = True
    a[pad : side - pad, c - h : c + h + 1] = True
    return BinaryMask.from_array(a)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
