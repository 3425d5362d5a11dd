"""Toy-scale VesSAM: frozen ViT stub + convolutional adapter, multi-prompt
encoder with two-stage cross-attention fusion, lightweight mask decoder."""

from .config import DEFAULT_CONFIG, GRADCHECK_CONFIG, ModelConfig
from .decoder import decode
from .encoder import adapter_forward, vit_stub_forward
from .gradients import ModelGradReport, full_model_grad_check
from .layers import record_attention
from .params import count_params, frozen, init_params, params_from_arrays, trainable
from .prompt_encoder import (
    FeatureSet,
    cross_attention,
    encode_dense,
    encode_graph,
    encode_sparse,
    fuse_prompts,
)
from .vessam import ALL_PROMPTS, ModelOutput, PromptFlags, forward, restrict_graph, run_model
