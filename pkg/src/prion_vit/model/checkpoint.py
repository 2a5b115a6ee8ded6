"""Checkpoint container: a numpy ``.npz`` archive with a JSON metadata record.

Float arrays are stored verbatim, so a save/load round trip is bit-exact.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, Optional

import numpy as np

from .config import MemoryState, PrionViTConfig
from .network import PrionViT

FORMAT = "prion-vit-checkpoint"
VERSION = 1


@dataclass
class Checkpoint:
    model: PrionViT
    state: MemoryState
    epoch: int = 0
    adam_m: Dict[str, np.ndarray] = field(default_factory=dict)
    adam_v: Dict[str, np.ndarray] = field(default_factory=dict)
    adam_t: int = 0
    rng_state: Optional[dict] = None
    extra: dict = field(default_factory=dict)


def save_checkpoint(path, ckpt: Checkpoint) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    meta = {
        "format": FORMAT,
        "version": VERSION,
        "config": ckpt.model.config.to_dict(),
        "seed": ckpt.model.seed,
        "target_shift": ckpt.model.target_shift,
        "target_scale": ckpt.model.target_scale,
        "param_names": list(ckpt.model.params),
        "step_count": ckpt.state.step_count,
        "epoch": ckpt.epoch,
        "adam_t": ckpt.adam_t,
        "rng_state": ckpt.rng_state,
        "extra": ckpt.extra,
    }
    arrays = {"memory": ckpt.state.M}
    for name, p in ckpt.model.params.items():
        arrays[f"param/{name}"] = p.data
    for name, arr in ckpt.adam_m.items():
        arrays[f"adam_m/{name}"] = arr
    for name, arr in ckpt.adam_v.items():
        arrays[f"adam_v/{name}"] = arr
    arrays["meta"] = np.frombuffer(json.dumps(meta, sort_keys=True).encode("utf-8"), dtype=np.uint8)
    with open(path, "wb") as fh:
        np.savez(fh, **arrays)
    return path


def load_checkpoint(path) -> Checkpoint:
    with np.load(path, allow_pickle=False) as npz:
        meta = json.loads(npz["meta"].tobytes().decode("utf-8"))
        if meta.get("format") != FORMAT:
            raise ValueError(f"{path}: not a {FORMAT} file")
        if meta.get("version") != VERSION:
            raise ValueError(f"{path}: unsupported checkpoint version {meta.get('version')}")
        config = PrionViTConfig.from_dict(meta["config"])
        model = PrionViT(config, seed=meta["seed"])
        model.set_weights({name: npz[f"param/{name}"] for name in meta["param_names"]})
        model.target_shift = meta["target_shift"]
        model.target_scale = meta["target_scale"]
        state = MemoryState(npz["memory"].copy(), int(meta["step_count"]))
        adam_m = {k.split("/", 1)[1]: npz[k].copy() for k in npz.files if k.startswith("adam_m/")}
        adam_v = {k.split("/", 1)[1]: npz[k].copy() for k in npz.files if k.startswith("adam_v/")}
    return Checkpoint(model, state, meta["epoch"], adam_m, adam_v, meta["adam_t"],
                      meta["rng_state"], meta.get("extra", {}))
