"""scikit-learn style regressor wrapping model construction, training and prediction."""

from __future__ import annotations

from typing import Optional

import numpy as np
from sklearn.base import BaseEstimator, RegressorMixin
from sklearn.utils.validation import check_array, check_is_fitted

from .model.config import PrionViTConfig
from .model.network import PrionViT
from .numerics.rng import make_rng
from .pipeline import AugmentConfig, SpeckleDataset, preprocess
from .training import TrainConfig, train


class PrionViTRegressor(RegressorMixin, BaseEstimator):
    """Temperature regressor on specklegram images.

    ``X`` is either a stack of grayscale images ``(n, H, W)``, which is run
    through :func:`prion_vit.pipeline.preprocess`, or already preprocessed
    ``(n, input_size, input_size, 3)`` arrays. ``y`` is in degrees Celsius.
    A ``validation_fraction`` of the samples is held out for best-epoch
    selection; set it to 0 to train on everything and keep the last epoch.
    """

    def __init__(self, input_size: int = 128, patch_size: int = 16, embed_dim: int = 64,
                 num_blocks: int = 4, num_heads: int = 4, ffn_dim: int = 128, head_hidden: int = 2048,
                 dropout_rate: float = 0.5, memory_enabled: bool = True, memory_mode: str = "per_sample",
                 memory_persistence: str = "stateful", inference_memory: str = "frozen",
                 epochs: int = 100, batch_size: int = 16, learning_rate: float = 1e-3,
                 validation_fraction: float = 0.1, augment: bool = False, random_state: int = 0):
        self.input_size = input_size
        self.patch_size = patch_size
        self.embed_dim = embed_dim
        self.num_blocks = num_blocks
        self.num_heads = num_heads
        self.ffn_dim = ffn_dim
        self.head_hidden = head_hidden
        self.dropout_rate = dropout_rate
        self.memory_enabled = memory_enabled
        self.memory_mode = memory_mode
        self.memory_persistence = memory_persistence
        self.inference_memory = inference_memory
        self.epochs = epochs
        self.batch_size = batch_size
        self.learning_rate = learning_rate
        self.validation_fraction = validation_fraction
        self.augment = augment
        self.random_state = random_state

    def _model_config(self) -> PrionViTConfig:
        return PrionViTConfig(
            input_size=self.input_size, patch_size=self.patch_size, embed_dim=self.embed_dim,
            num_blocks=self.num_blocks, num_heads=self.num_heads, ffn_dim=self.ffn_dim,
            head_hidden=self.head_hidden, dropout_rate=self.dropout_rate,
            memory_enabled=self.memory_enabled, memory_mode=self.memory_mode,
            memory_persistence=self.memory_persistence, inference_memory=self.inference_memory,
        )

    def _images(self, X) -> np.ndarray:
        X = check_array(X, allow_nd=True, ensure_2d=False, dtype=np.float64)
        if X.ndim == 3:
            return np.stack([preprocess(img, self.input_size) for img in X])
        if X.ndim == 4:
            expected = (self.input_size, self.input_size, 3)
            if X.shape[1:] != expected:
                raise ValueError(f"expected images of shape (n, {expected[0]}, {expected[1]}, 3), got {X.shape}")
            return X
        raise ValueError(f"X must have 3 (grayscale) or 4 (preprocessed) dimensions, got {X.ndim}")

    def fit(self, X, y) -> "PrionViTRegressor":
        images = self._images(X)
        y = check_array(y, ensure_2d=False, dtype=np.float64).reshape(-1)
        if len(y) != len(images):
            raise ValueError(f"X has {len(images)} samples but y has {len(y)}")
        if not 0.0 <= self.validation_fraction < 1.0:
            raise ValueError("validation_fraction must lie in [0, 1)")

        order = make_rng(self.random_state, 3).permutation(len(y))
        n_val = int(np.floor(self.validation_fraction * len(y)))
        if len(y) - n_val < 1:
            raise ValueError("no samples left for training")
        val_idx, train_idx = order[:n_val], order[n_val:]
        data = SpeckleDataset(images, y, [str(i) for i in range(len(y))])
        val = data.subset(val_idx) if n_val else None

        model = PrionViT(self._model_config(), self.random_state)
        cfg = TrainConfig(epochs=self.epochs, batch_size=self.batch_size, learning_rate=self.learning_rate,
                          seed=self.random_state)
        aug = AugmentConfig() if self.augment else AugmentConfig(enabled=False)
        result = train(model, data.subset(train_idx), val, cfg, aug)
        self.model_ = result.model
        self.state_ = result.state
        self.history_ = result.history
        self.n_features_in_ = int(np.prod(images.shape[1:]))
        return self

    def predict(self, X, batch_size: Optional[int] = None) -> np.ndarray:
        check_is_fitted(self, "model_")
        return self.model_.predict(self._images(X), self.state_, batch_size)
