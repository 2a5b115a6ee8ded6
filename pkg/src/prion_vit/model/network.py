"""The Prion-ViT regressor network."""

from __future__ import annotations

from collections import OrderedDict
from typing import Dict, Optional, Tuple

import numpy as np

from ..numerics import tensor as T
from ..numerics.rng import make_rng
from ..numerics.tensor import Tensor
from .config import MemoryState, PrionViTConfig
from .layers import (
    extract_patches,
    patchify_embed,
    prion_layer_step,
    regression_head,
    transformer_block,
)

TRAIN, EVAL = "train", "eval"


def block_prefix(i: int) -> str:
    return f"block{i}."


def init_params(config: PrionViTConfig, seed: int) -> "OrderedDict[str, Tensor]":
    """Seeded initialisation: N(0, init_std) weights, zero biases, unit LN scales.

    Memory gate parameters are created last (and zero) so that enabling the
    memory does not shift the draws for any other parameter.
    """
    c = config
    rng = make_rng(seed)
    d = c.embed_dim
    std = c.init_std
    p: "OrderedDict[str, np.ndarray]" = OrderedDict()
    p["patch_w"] = rng.normal(0.0, std, (c.patch_dim, d))
    p["patch_b"] = np.zeros(d)
    p["pos"] = rng.normal(0.0, std, (c.num_tokens, d))
    for i in range(c.num_blocks):
        pre = block_prefix(i)
        p[pre + "ln1_g"] = np.ones(d)
        p[pre + "ln1_b"] = np.zeros(d)
        for name in ("q", "k", "v", "o"):
            p[pre + f"w{name}"] = rng.normal(0.0, std, (d, d))
        p[pre + "ln2_g"] = np.ones(d)
        p[pre + "ln2_b"] = np.zeros(d)
        p[pre + "ffn_w1"] = rng.normal(0.0, std, (d, c.ffn_dim))
        p[pre + "ffn_b1"] = np.zeros(c.ffn_dim)
        p[pre + "ffn_w2"] = rng.normal(0.0, std, (c.ffn_dim, d))
        p[pre + "ffn_b2"] = np.zeros(d)
    p["head_w1"] = rng.normal(0.0, std, (d, c.head_hidden))
    p["head_b1"] = np.zeros(c.head_hidden)
    p["head_w2"] = rng.normal(0.0, std, (c.head_hidden, 1))
    p["head_b2"] = np.zeros(1)
    if c.memory_enabled:
        p["gate_w"] = np.zeros((d, d))
        p["gate_b"] = np.full(d, float(c.gate_bias_init))
    return OrderedDict((k, Tensor(v, requires_grad=True, name=k)) for k, v in p.items())


class PrionViT:
    """Vision Transformer with an optional gated memory between blocks.

    Predictions are ``head(x) * target_scale + target_shift`` so the
    network can work on standardised targets while reporting degrees C.
    """

    def __init__(self, config: PrionViTConfig, seed: int = 0,
                 params: Optional[Dict[str, Tensor]] = None):
        self.config = config
        self.seed = int(seed)
        self.params = params if params is not None else init_params(config, seed)
        self.target_shift = 0.0
        self.target_scale = 1.0

    def initial_state(self) -> MemoryState:
        return MemoryState.zeros(self.config)

    def parameters(self):
        return list(self.params.values())

    def named_parameters(self):
        return list(self.params.items())

    def n_parameters(self) -> int:
        return int(sum(p.data.size for p in self.params.values()))

    def get_weights(self) -> Dict[str, np.ndarray]:
        return {k: v.data.copy() for k, v in self.params.items()}

    def set_weights(self, weights: Dict[str, np.ndarray]) -> None:
        if set(weights) != set(self.params):
            raise ValueError("weight names do not match the model parameters")
        for k, v in weights.items():
            if v.shape != self.params[k].shape:
                raise ValueError(f"{k}: shape {v.shape} != {self.params[k].shape}")
            self.params[k].data = np.array(v, dtype=np.float64)

    def _writes_memory(self, mode: str) -> bool:
        c = self.config
        if not c.memory_enabled or c.memory_persistence == "stateless":
            return False
        return mode == TRAIN or c.inference_memory == "online"

    def forward(self, images: np.ndarray, state: Optional[MemoryState] = None, mode: str = TRAIN,
                rng: Optional[np.random.Generator] = None) -> Tuple[Tensor, MemoryState]:
        """Run a batch of (B, S, S, C) images; returns (B, 1) predictions and the next state.

        The incoming memory is a constant (no gradient reaches earlier
        passes). Within the pass, gradients flow through every memory step.
        Evaluation runs the same memory steps as training, but with frozen
        inference memory the updated state is discarded. Because the
        within-pass memory is a batch average, eval-mode predictions depend
        on the batch they are computed in; :meth:`predict` therefore uses
        one batch for the whole input by default.
        """
        if mode not in (TRAIN, EVAL):
            raise ValueError(f"mode must be 'train' or 'eval', got {mode!r}")
        c = self.config
        p = self.params
        images = np.asarray(images, dtype=np.float64)
        expected = (c.input_size, c.input_size, c.in_channels)
        if images.ndim != 4 or images.shape[1:] != expected:
            raise ValueError(f"expected images of shape (B, {expected[0]}, {expected[1]}, {expected[2]}), "
                             f"got {images.shape}")
        state = state if state is not None else self.initial_state()
        train = mode == TRAIN
        drop = train and c.dropout_rate > 0
        if drop and rng is None:
            raise ValueError("training-mode forward with dropout needs an rng")

        x = patchify_embed(images, p, c.patch_size)
        memory = None
        if c.memory_enabled:
            state.check(c)
            start = np.zeros_like(state.M) if c.memory_persistence == "stateless" else state.M
            memory = Tensor(start.copy())

        for i in range(c.num_blocks):
            x = transformer_block(x, p, c.num_heads, c.ln_eps, block_prefix(i))
            if memory is not None:
                x, memory = prion_layer_step(x, memory, p["gate_w"], p["gate_b"], c.memory_mode)

        out = regression_head(x, p, c.dropout_rate, rng, drop)
        if self.target_scale != 1.0 or self.target_shift != 0.0:
            out = T.add(T.mul(out, self.target_scale), self.target_shift)

        if self._writes_memory(mode):
            new_state = MemoryState(memory.data.copy(), state.step_count + 1)
        else:
            new_state = state.copy()
        return out, new_state

    def predict(self, images: np.ndarray, state: Optional[MemoryState] = None,
                batch_size: Optional[int] = None) -> np.ndarray:
        """Eval-mode predictions as a flat array, without recording gradients.

        ``batch_size=None`` evaluates everything as a single batch, which
        makes the result independent of sample order.
        """
        state = state if state is not None else self.initial_state()
        step = batch_size or max(len(images), 1)
        outs = []
        with T.no_grad():
            for i in range(0, len(images), step):
                out, state = self.forward(images[i:i + step], state, EVAL)
                outs.append(out.data[:, 0])
        return np.concatenate(outs) if outs else np.zeros(0)


def reference_vit_forward(weights: Dict[str, np.ndarray], images: np.ndarray,
                          config: PrionViTConfig, target_shift: float = 0.0,
                          target_scale: float = 1.0) -> np.ndarray:
    """Plain ViT inference in bare numpy, without tape or memory.

    Serves as the comparison path for the memory-disabled network.
    """
    c = config
    w = weights
    x = extract_patches(images, c.patch_size) @ w["patch_w"] + w["patch_b"]
    x = x + w["pos"]
    b, n, d = x.shape
    h = c.num_heads
    dh = d // h

    def ln(v, g, beta):
        mu = v.mean(axis=-1, keepdims=True)
        vc = v - mu
        var = (vc * vc).mean(axis=-1, keepdims=True)
        inv = 1.0 / np.sqrt(var + c.ln_eps)
        return vc * inv * g + beta

    def split(t):
        return t.reshape(b, n, h, dh).transpose(0, 2, 1, 3)

    for i in range(c.num_blocks):
        pre = block_prefix(i)
        y = ln(x, w[pre + "ln1_g"], w[pre + "ln1_b"])
        q = split(y @ w[pre + "wq"])
        k = split(y @ w[pre + "wk"])
        v = split(y @ w[pre + "wv"])
        s = (q @ k.transpose(0, 1, 3, 2)) * (1.0 / np.sqrt(dh))
        s = s - s.max(axis=-1, keepdims=True)
        e = np.exp(s)
        a = e / e.sum(axis=-1, keepdims=True)
        ctx = (a @ v).transpose(0, 2, 1, 3).reshape(b, n, d)
        x = x + ctx @ w[pre + "wo"]
        y = ln(x, w[pre + "ln2_g"], w[pre + "ln2_b"])
        f = y @ w[pre + "ffn_w1"] + w[pre + "ffn_b1"]
        f = np.where(f > 0, f, 0.0)
        x = x + (f @ w[pre + "ffn_w2"] + w[pre + "ffn_b2"])

    pooled = x.mean(axis=1)
    hdn = pooled @ w["head_w1"] + w["head_b1"]
    hdn = np.where(hdn > 0, hdn, 0.0)
    out = hdn @ w["head_w2"] + w["head_b2"]
    if target_scale != 1.0 or target_shift != 0.0:
        out = out * target_scale + target_shift
    return out
