"""Run configuration files: JSON with ``model``, ``train``, ``data`` and ``augment`` sections."""

from __future__ import annotations

import json
import os
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path
from typing import Optional

from ..model.config import PrionViTConfig, config_hash, reject_unknown
from ..pipeline import AugmentConfig, SplitSpec
from ..training import TrainConfig

SEED_ENV = "PRION_VIT_SEED"
SECTIONS = ("model", "train", "data", "augment")


@dataclass(frozen=True)
class DataConfig:
    """Where samples come from.

    With ``manifest`` set, images are read from that manifest's directory.
    Otherwise a synthetic set is rendered from the generator fields below.
    """

    manifest: Optional[str] = None
    t_min: float = 0.0
    t_max: float = 120.0
    step: float = 0.2
    n_modes: int = 40
    kappa_min: float = 0.02
    kappa_max: float = 0.20
    correlation_px: float = 6.0
    image_size: int = 126
    generator_seed: int = 0
    train_frac: float = 0.7
    test_frac: float = 0.2
    val_frac: float = 0.1
    split_seed: int = 0

    def split_spec(self) -> SplitSpec:
        return SplitSpec(self.train_frac, self.test_frac, self.val_frac, self.split_seed)

    @classmethod
    def from_dict(cls, data) -> "DataConfig":
        reject_unknown(cls, data, "data")
        return cls(**data)


@dataclass(frozen=True)
class RunConfig:
    model: PrionViTConfig = field(default_factory=PrionViTConfig)
    train: TrainConfig = field(default_factory=TrainConfig)
    data: DataConfig = field(default_factory=DataConfig)
    augment: AugmentConfig = field(default_factory=AugmentConfig)

    @property
    def seed(self) -> int:
        return self.train.seed

    def to_dict(self) -> dict:
        return {
            "model": self.model.to_dict(),
            "train": self.train.to_dict(),
            "data": asdict(self.data),
            "augment": asdict(self.augment),
        }

    def hash(self) -> str:
        return config_hash(self.to_dict())

    def with_seed(self, seed: int) -> "RunConfig":
        return replace(self, train=replace(self.train, seed=int(seed)))

    def with_memory(self, enabled: bool) -> "RunConfig":
        return replace(self, model=replace(self.model, memory_enabled=enabled))


def parse_config(payload: dict) -> RunConfig:
    if not isinstance(payload, dict):
        raise ValueError("config must be a JSON object")
    unknown = sorted(set(payload) - set(SECTIONS))
    if unknown:
        raise ValueError(f"unknown config section(s): {', '.join(unknown)}")
    return RunConfig(
        model=PrionViTConfig.from_dict(payload.get("model", {})),
        train=TrainConfig.from_dict(payload.get("train", {})),
        data=DataConfig.from_dict(payload.get("data", {})),
        augment=_augment_from_dict(payload.get("augment", {})),
    )


def _augment_from_dict(data) -> AugmentConfig:
    reject_unknown(AugmentConfig, data, "augment")
    return AugmentConfig(**data)


def load_config(path, seed: Optional[int] = None) -> RunConfig:
    """Read a config file; ``seed`` (then ``$PRION_VIT_SEED``) overrides ``train.seed``."""
    with open(path, encoding="utf-8") as fh:
        cfg = parse_config(json.load(fh))
    env = os.environ.get(SEED_ENV)
    if seed is not None:
        cfg = cfg.with_seed(seed)
    elif env:
        try:
            cfg = cfg.with_seed(int(env))
        except ValueError:
            raise ValueError(f"${SEED_ENV} must be an integer, got {env!r}") from None
    return cfg


def write_config(path, cfg: RunConfig) -> Path:
    path = Path(path)
    path.write_text(json.dumps(cfg.to_dict(), sort_keys=True, indent=2) + "\n", encoding="utf-8")
    return path
