"""Finite-difference check of the whole forward pass."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .. import autodiff as ad
from ..autodiff import GradCheckReport, Tensor, grad_check
from ..prompts import generate_prompt_set
from ..synthgen import TreeSpec, generate_vessel_tree, render_image
from ..topology import build_graph
from .config import GRADCHECK_CONFIG, ModelConfig
from .params import init_params
from .vessam import ALL_PROMPTS, forward


@dataclass
class ModelGradReport:
    max_rel_err: float
    passed: bool
    per_param: dict[str, GradCheckReport]

    @property
    def worst_param(self) -> str:
        return max(self.per_param, key=lambda k: self.per_param[k].max_rel_err)

    @property
    def n_kinks(self) -> int:
        return sum(r.n_kinks for r in self.per_param.values())


def full_model_grad_check(
    config: ModelConfig = GRADCHECK_CONFIG,
    seed: int = 0,
    coords_per_param: int = 4,
    tol: float = 1e-4,
    eps: float = 1e-5,
    alpha: float = 0.5,
    gain: float = 2.0,
    jitter: float = 0.1,
    flags=ALL_PROMPTS,
) -> ModelGradReport:
    """Check d/dθ of sum(logits * R) for every parameter tensor θ.

    The check runs at a generic point rather than at initialization.  Fresh
    init makes the graph features nearly constant, so attention query/key
    weights get gradients around 1e-9, below the finite-difference noise
    floor.  Trainable tensors are therefore scaled by ``gain`` plus uniform
    ``jitter``, and ``alpha`` replaces the adapter's zero residual scale so
    that branch carries gradient too.  R is a fixed random weighting.
    Coordinates whose perturbation crosses a ReLU kink are resampled (see
    ``grad_check``).
    """
    rng = np.random.default_rng(seed)
    mask, _ = generate_vessel_tree(TreeSpec(seed=seed, size=config.image_size, branch_events=2, width_px=2))
    ps = generate_prompt_set(mask)
    graph = build_graph(ps)
    image = render_image(mask, seed)
    params = init_params(config)
    for name in sorted(params):
        t = params[name]
        if t.requires_grad:
            t.data[...] = gain * t.data + rng.uniform(-jitter, jitter, t.shape)
    params["adapter.alpha"].data[:] = alpha
    weight = Tensor(rng.normal(size=(config.image_size, config.image_size)))

    def objective(_):
        return ad.sum(ad.mul(forward(image, ps, graph, params, config, flags), weight))

    reports = {}
    for k, name in enumerate(sorted(params)):
        reports[name] = grad_check(objective, params[name], eps=eps, tol=tol,
                                   max_coords=coords_per_param, seed=seed + k)
    worst = max(r.max_rel_err for r in reports.values())
    return ModelGradReport(worst, worst <= tol, reports)
