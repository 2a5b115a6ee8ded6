"""Finite-difference check of the full network's parameter gradients."""

from __future__ import annotations

from dataclasses import replace
from typing import Dict, Sequence

import numpy as np

from ..model.config import PrionViTConfig
from ..model.network import TRAIN, PrionViT
from ..numerics.gradcheck import grad_check
from ..numerics.rng import make_rng
from ..training import mse_loss

TINY = PrionViTConfig(input_size=32, patch_size=16, embed_dim=8, num_blocks=2, num_heads=2,
                      ffn_dim=16, head_hidden=8, dropout_rate=0.0)


def check_network(config: PrionViTConfig, seed: int = 0, batch: int = 3, h: float = 1e-4,
                  tol: float = 1e-4, jitter: float = 0.3):
    """Gradient check of the MSE loss of one train-mode pass.

    Weights get extra Gaussian ``jitter`` and the incoming memory is random,
    so the zero-initialised gate and a zero memory do not hide errors.
    Dropout masks are redrawn from the same seed on every evaluation.
    The step is 1e-4: at 1e-3 truncation error alone reaches ~1e-4 here.
    """
    model = PrionViT(config, seed)
    rng = make_rng(seed, 7)
    for p in model.parameters():
        p.data = p.data + rng.normal(0.0, jitter, p.shape)
    images = rng.random((batch, config.input_size, config.input_size, config.in_channels))
    target = rng.normal(size=batch)
    state = model.initial_state()
    if config.memory_enabled:
        state.M = rng.normal(size=state.M.shape)

    def loss():
        pred, _ = model.forward(images, state, TRAIN, make_rng(seed, 8))
        return mse_loss(pred, target)

    return grad_check(loss, model.params, h=h, tol=tol, rng=make_rng(seed, 9))


def check_modes(config: PrionViTConfig, seed: int = 0, modes: Sequence[str] = ("per_sample", "literal"),
                **kwargs) -> Dict[str, object]:
    if not config.memory_enabled:
        return {"plain": check_network(config, seed, **kwargs)}
    return {m: check_network(replace(config, memory_mode=m), seed, **kwargs) for m in modes}
