from .checkpoint import Checkpoint, load_checkpoint, save_checkpoint
from .config import MemoryState, PrionViTConfig, config_hash
from .layers import (
    broadcast_memory,
    compute_gate,
    extract_patches,
    mhsa,
    patchify_embed,
    prion_layer_step,
    regression_head,
    transformer_block,
    update_memory,
)
from .network import EVAL, TRAIN, PrionViT, init_params, reference_vit_forward

__all__ = [
    "EVAL",
    "TRAIN",
    "Checkpoint",
    "MemoryState",
    "PrionViT",
    "PrionViTConfig",
    "broadcast_memory",
    "compute_gate",
    "config_hash",
    "extract_patches",
    "init_params",
    "load_checkpoint",
    "mhsa",
    "patchify_embed",
    "prion_layer_step",
    "reference_vit_forward",
    "regression_head",
    "save_checkpoint",
    "transformer_block",
    "update_memory",
]
