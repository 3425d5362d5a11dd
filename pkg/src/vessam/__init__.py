"""Vessel segmentation with multi-prompt structural guidance, at toy scale.

Subpackages: ``raster`` (mask I/O), ``skeleton`` (thinning), ``prompts``
(bifurcation / midpoint / skeleton prompts), ``topology`` (vessel graph),
``autodiff`` (reverse-mode engine), ``model`` (the network), ``synthgen``
(procedural vessel trees) and ``eval`` (metrics, training, ablation).
"""

__version__ = "0.1.0"
