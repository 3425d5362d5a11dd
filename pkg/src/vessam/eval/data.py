"""Samples and the standard synthetic benchmark."""

from __future__ import annotations

import re
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from ..prompts import PromptSet, generate_prompt_set
from ..errors import EmptyDataset, ShapeMismatch
from ..raster import BinaryMask, load_gray, load_mask
from ..synthgen import TreeSpec, generate_vessel_tree, render_image
from ..topology import VesselGraph, build_graph


@dataclass(frozen=True)
class Sample:
    image: np.ndarray
    mask: BinaryMask
    prompts: PromptSet
    graph: VesselGraph


def make_sample(mask: BinaryMask, image: np.ndarray) -> Sample:
    ps = generate_prompt_set(mask)
    return Sample(np.asarray(image, dtype=np.float64), mask, ps, build_graph(ps))


def synthetic_sample(spec: TreeSpec) -> Sample:
    mask, _ = generate_vessel_tree(spec)
    return make_sample(mask, render_image(mask, spec.seed))


def benchmark_specs(seed: int = 42, n: int = 250, size: int = 64,
                    branches=(0, 6), widths=(1, 3)) -> list[TreeSpec]:
    rng = np.random.default_rng(seed)
    specs = []
    for _ in range(n):
        specs.append(TreeSpec(
            seed=int(rng.integers(0, 2**63 - 1)),
            size=size,
            branch_events=int(rng.integers(branches[0], branches[1] + 1)),
            width_px=int(rng.integers(widths[0], widths[1] + 1)),
            wiggle=int(rng.integers(0, 257)) / 256,
        ))
    return specs


def standard_benchmark(seed: int = 42, n_train: int = 200, n_test: int = 50, size: int = 64) -> list[Sample]:
    """The fixed synthetic benchmark: ``n_train + n_test`` generated samples."""
    return [synthetic_sample(s) for s in benchmark_specs(seed, n_train + n_test, size)]


def split(dataset, n_test: int, seed: int):
    """Deterministic (train, test) split of ``dataset`` by ``seed``."""
    order = np.random.default_rng(seed).permutation(len(dataset))
    test_idx = set(order[:n_test].tolist())
    train = [dataset[i] for i in range(len(dataset)) if i not in test_idx]
    test = [dataset[i] for i in sorted(test_idx)]
    return train, test


_MASK_NAME = re.compile(r"^(.+)_mask\.(pgm|png)$")


def load_dataset_dir(path) -> list[Sample]:
    """Samples from ``<stem>_mask.pgm|png`` files in sorted order.

    A matching ``<stem>_image.pgm`` supplies the image (gray / 255); without
    one the image is rendered from the mask, seeded by the file's position.
    """
    root = Path(path)
    if not root.is_dir():
        raise FileNotFoundError(f"dataset directory {root} not found")
    samples = []
    names = sorted(f.name for f in root.iterdir() if _MASK_NAME.match(f.name))
    for index, name in enumerate(names):
        stem = _MASK_NAME.match(name).group(1)
        mask = load_mask((root / name).read_bytes())
        image_path = root / f"{stem}_image.pgm"
        if image_path.exists():
            image = load_gray(image_path.read_bytes()) / 255.0
            if image.shape != mask.array.shape:
                raise ShapeMismatch(f"{image_path.name}: image and mask sizes differ")
        else:
            image = render_image(mask, index)
        samples.append(make_sample(mask, image))
    if not samples:
        raise EmptyDataset(f"no *_mask.pgm or *_mask.png files in {root}")
    return samples
