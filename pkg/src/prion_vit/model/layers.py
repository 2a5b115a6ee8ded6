"""Differentiable building blocks of the network, written against ``numerics``.

Parameters are passed as plain mappings from name to :class:`Tensor` so the
same functions serve the model, the gradient checker and the tests.
"""

from __future__ import annotations

from typing import Mapping, Optional, Tuple

import numpy as np

from ..numerics import tensor as T
from ..numerics.tensor import Tensor

Params = Mapping[str, Tensor]

# float64 sigmoid rounds to exactly 0 or 1 beyond |z| ~ 37 / 745
GATE_LO = float(np.finfo(np.float64).tiny)
GATE_HI = float(np.nextafter(1.0, 0.0))


def extract_patches(images: np.ndarray, patch: int) -> np.ndarray:
    """(B, H, W, C) -> (B, N, patch*patch*C), patches in row-major grid order."""
    images = np.asarray(images, dtype=np.float64)
    if images.ndim != 4:
        raise ValueError(f"expected (B, H, W, C) images, got shape {images.shape}")
    b, h, w, c = images.shape
    if h % patch or w % patch:
        raise ValueError(f"image extents {(h, w)} are not divisible by patch size {patch}")
    gh, gw = h // patch, w // patch
    x = images.reshape(b, gh, patch, gw, patch, c).transpose(0, 1, 3, 2, 4, 5)
    return x.reshape(b, gh * gw, patch * patch * c)


def patchify_embed(images: np.ndarray, p: Params, patch: int) -> Tensor:
    """Stride-``patch`` convolution as a shared linear map, plus positions."""
    patches = extract_patches(images, patch)
    tokens = T.add(T.matmul(Tensor(patches), p["patch_w"]), p["patch_b"])
    return T.add(tokens, p["pos"])


def mhsa(x: Tensor, p: Params, num_heads: int, prefix: str = "") -> Tensor:
    b, n, d = x.shape
    dh = d // num_heads

    def heads(t: Tensor) -> Tensor:
        return T.transpose(T.reshape(t, (b, n, num_heads, dh)), (0, 2, 1, 3))

    q = heads(T.matmul(x, p[prefix + "wq"]))
    k = heads(T.matmul(x, p[prefix + "wk"]))
    v = heads(T.matmul(x, p[prefix + "wv"]))
    scores = T.mul(T.matmul(q, T.swap_last(k)), 1.0 / np.sqrt(dh))
    attn = T.softmax(scores, axis=-1)
    ctx = T.reshape(T.transpose(T.matmul(attn, v), (0, 2, 1, 3)), (b, n, d))
    return T.matmul(ctx, p[prefix + "wo"])


def feed_forward(x: Tensor, p: Params, prefix: str = "") -> Tensor:
    h = T.relu(T.add(T.matmul(x, p[prefix + "ffn_w1"]), p[prefix + "ffn_b1"]))
    return T.add(T.matmul(h, p[prefix + "ffn_w2"]), p[prefix + "ffn_b2"])


def transformer_block(x: Tensor, p: Params, num_heads: int, eps: float, prefix: str = "",
                      dropout_rate: float = 0.0, rng: Optional[np.random.Generator] = None,
                      dropout_active: bool = False) -> Tensor:
    """Pre-norm block: ``x + MHSA(LN(x))`` then ``+ FFN(LN(.))``.

    ``dropout_rate`` applies to both residual branches; the default
    architecture keeps it at zero and only drops units in the head.
    """
    a = mhsa(T.layer_norm(x, p[prefix + "ln1_g"], p[prefix + "ln1_b"], eps), p, num_heads, prefix)
    x1 = T.add(x, T.dropout(a, dropout_rate, rng, dropout_active))
    f = feed_forward(T.layer_norm(x1, p[prefix + "ln2_g"], p[prefix + "ln2_b"], eps), p, prefix)
    return T.add(x1, T.dropout(f, dropout_rate, rng, dropout_active))


def compute_gate(x: Tensor, w_g: Tensor, b_g: Tensor) -> Tensor:
    """``sigmoid(x @ W_g + b_g)``, bias broadcast over batch and tokens.

    Saturated values are clamped so the gate stays strictly inside (0, 1).
    """
    return T.clip(T.sigmoid(T.add(T.matmul(x, w_g), b_g)), GATE_LO, GATE_HI)


def gated_candidates(memory: Tensor, x: Tensor, gate: Tensor) -> Tensor:
    """Per-sample memory candidates ``G_b * M + (1 - G_b) * X_b``."""
    return T.add(T.mul(gate, memory), T.mul(T.sub(1.0, gate), x))


def update_memory(memory: Tensor, x: Tensor, gate: Tensor) -> Tensor:
    """Batch average of the gated candidates; returns an (N, D) memory."""
    if memory.shape != x.shape[1:]:
        raise ValueError(f"memory {memory.shape} does not match token shape {x.shape[1:]}")
    return T.mean(gated_candidates(memory, x, gate), axis=0)


def broadcast_memory(memory: Tensor, batch: int) -> Tensor:
    if batch < 1:
        raise ValueError("batch must be >= 1")
    return T.broadcast_to(memory, (batch,) + memory.shape)


def prion_layer_step(x: Tensor, memory: Tensor, w_g: Tensor, b_g: Tensor,
                     mode: str) -> Tuple[Tensor, Tensor]:
    """One memory step after a transformer block.

    Returns ``(x_next, new_memory)``. In ``literal`` mode every batch row of
    ``x_next`` is the averaged memory; in ``per_sample`` mode each row keeps
    its own gated candidate.
    """
    if memory.shape != x.shape[1:]:
        raise ValueError(f"memory {memory.shape} does not match token shape {x.shape[1:]}")
    gate = compute_gate(x, w_g, b_g)
    cand = gated_candidates(memory, x, gate)
    new_memory = T.mean(cand, axis=0)
    if mode == "literal":
        return broadcast_memory(new_memory, x.shape[0]), new_memory
    if mode == "per_sample":
        return cand, new_memory
    raise ValueError(f"unknown memory mode {mode!r}")


def regression_head(x: Tensor, p: Params, dropout_rate: float,
                    rng: Optional[np.random.Generator], dropout_active: bool) -> Tensor:
    pooled = T.mean(x, axis=1)
    h = T.relu(T.add(T.matmul(pooled, p["head_w1"]), p["head_b1"]))
    h = T.dropout(h, dropout_rate, rng, dropout_active)
    return T.add(T.matmul(h, p["head_w2"]), p["head_b2"])
