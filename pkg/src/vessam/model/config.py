from __future__ import annotations

import json
from dataclasses import asdict, dataclass

from ..errors import ShapeMismatch


@dataclass(frozen=True)
class ModelConfig:
    """Toy-scale architecture hyperparameters.

    The decoder doubles resolution ``decoder_upsample_stages`` times starting
    from the token grid, so ``patch_size`` must equal 2**decoder_upsample_stages.
    """

    image_size: int = 64
    patch_size: int = 8
    embed_dim: int = 64
    vit_depth: int = 2
    heads: int = 4
    adapter_reduction: int = 4
    gcn_layers: int = 2
    decoder_upsample_stages: int = 3
    decoder_depth: int = 2
    mlp_ratio: int = 2
    seed: int = 0

    def __post_init__(self):
        for name in ("image_size", "patch_size", "embed_dim", "vit_depth", "heads",
                     "adapter_reduction", "gcn_layers", "decoder_upsample_stages", "mlp_ratio"):
            if getattr(self, name) < 1:
                raise ShapeMismatch(f"{name} must be >= 1")
        if self.decoder_depth < 0:
            raise ShapeMismatch("decoder_depth must be >= 0")
        if self.image_size % self.patch_size:
            raise ShapeMismatch("image_size must be divisible by patch_size")
        if self.embed_dim % self.heads:
            raise ShapeMismatch("embed_dim must be divisible by heads")
        if self.embed_dim % self.adapter_reduction:
            raise ShapeMismatch("embed_dim must be divisible by adapter_reduction")
        if self.patch_size != 2 ** self.decoder_upsample_stages:
            raise ShapeMismatch("patch_size must equal 2**decoder_upsample_stages")
        if self.grid % 2:
            raise ShapeMismatch("token grid side must be even for the adapter's spatial branch")

    @property
    def grid(self) -> int:
        return self.image_size // self.patch_size

    @property
    def tokens(self) -> int:
        return self.grid * self.grid

    @property
    def head_dim(self) -> int:
        return self.embed_dim // self.heads

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=2, sort_keys=True) + "\n"

    @classmethod
    def from_dict(cls, d: dict) -> "ModelConfig":
        known = cls.__dataclass_fields__
        return cls(**{k: v for k, v in d.items() if k in known})

    @classmethod
    def from_json(cls, text: str) -> "ModelConfig":
        return cls.from_dict(json.loads(text))


DEFAULT_CONFIG = ModelConfig()

# small enough for a full-model finite-difference check in seconds
GRADCHECK_CONFIG = ModelConfig(
    image_size=32, patch_size=8, embed_dim=16, vit_depth=1, heads=2,
    adapter_reduction=4, gcn_layers=2, decoder_upsample_stages=3, seed=0,
)
