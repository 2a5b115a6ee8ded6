from __future__ import annotations

import hashlib
import json
from dataclasses import asdict, dataclass, fields
from typing import Any, Mapping

import numpy as np

MEMORY_MODES = ("per_sample", "literal")
PERSISTENCE = ("stateful", "stateless")
INFERENCE_MEMORY = ("frozen", "online")


def reject_unknown(cls, data: Mapping[str, Any], section: str) -> None:
    known = {f.name for f in fields(cls)}
    unknown = sorted(set(data) - known)
    if unknown:
        raise ValueError(f"unknown key(s) in '{section}': {', '.join(unknown)}")


def config_hash(payload: Mapping[str, Any]) -> str:
    """SHA-256 of the canonical (sorted-key, compact) JSON encoding."""
    blob = json.dumps(payload, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode("utf-8")).hexdigest()


@dataclass(frozen=True)
class PrionViTConfig:
    """Architecture and memory-mode settings.

    ``memory_mode`` picks how the gated memory feeds the next block:
    ``per_sample`` keeps each sample's own gated mix, ``literal`` broadcasts
    the batch-averaged memory to every sample. ``memory_persistence`` decides
    whether the memory survives between forward passes, and
    ``inference_memory`` whether evaluation writes to it.
    """

    input_size: int = 128
    patch_size: int = 16
    in_channels: int = 3
    embed_dim: int = 64
    num_blocks: int = 4
    num_heads: int = 4
    ffn_dim: int = 128
    head_hidden: int = 2048
    dropout_rate: float = 0.5
    ln_eps: float = 1e-6
    init_std: float = 0.02
    gate_bias_init: float = 0.0
    memory_enabled: bool = True
    memory_mode: str = "per_sample"
    memory_persistence: str = "stateful"
    inference_memory: str = "frozen"

    def __post_init__(self):
        if self.input_size % self.patch_size:
            raise ValueError(f"input_size {self.input_size} is not divisible by patch_size {self.patch_size}")
        if self.embed_dim % self.num_heads:
            raise ValueError(f"embed_dim {self.embed_dim} is not divisible by num_heads {self.num_heads}")
        for name in ("input_size", "patch_size", "in_channels", "embed_dim", "num_blocks",
                     "num_heads", "ffn_dim", "head_hidden"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be >= 1")
        if not 0.0 <= self.dropout_rate < 1.0:
            raise ValueError("dropout_rate must lie in [0, 1)")
        if self.ln_eps <= 0:
            raise ValueError("ln_eps must be positive")
        if self.memory_mode not in MEMORY_MODES:
            raise ValueError(f"memory_mode must be one of {MEMORY_MODES}")
        if self.memory_persistence not in PERSISTENCE:
            raise ValueError(f"memory_persistence must be one of {PERSISTENCE}")
        if self.inference_memory not in INFERENCE_MEMORY:
            raise ValueError(f"inference_memory must be one of {INFERENCE_MEMORY}")

    @property
    def grid(self) -> int:
        return self.input_size // self.patch_size

    @property
    def num_tokens(self) -> int:
        return self.grid * self.grid

    @property
    def patch_dim(self) -> int:
        return self.patch_size * self.patch_size * self.in_channels

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> "PrionViTConfig":
        reject_unknown(cls, data, "model")
        return cls(**data)

    def hash(self) -> str:
        return config_hash(self.to_dict())


@dataclass
class MemoryState:
    """Persistent token-shaped memory carried between forward passes."""

    M: np.ndarray
    step_count: int = 0

    @classmethod
    def zeros(cls, config: PrionViTConfig) -> "MemoryState":
        return cls(np.zeros((config.num_tokens, config.embed_dim)), 0)

    def copy(self) -> "MemoryState":
        return MemoryState(self.M.copy(), self.step_count)

    def check(self, config: PrionViTConfig) -> None:
        expected = (config.num_tokens, config.embed_dim)
        if self.M.shape != expected:
            raise ValueError(f"memory state has shape {self.M.shape}, config expects {expected}")
        if not np.all(np.isfinite(self.M)):
            raise ValueError("memory state contains non-finite values")
