"""Loss, optimiser, training loop and regression metrics."""

from __future__ import annotations

import csv
import io
import json
import logging
import math
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Dict, List, Mapping, Optional, Sequence

import numpy as np

from .model.checkpoint import Checkpoint, save_checkpoint
from .model.config import MemoryState, reject_unknown
from .model.network import EVAL, TRAIN, PrionViT
from .numerics import tensor as T
from .numerics.rng import make_rng
from .numerics.tensor import Tape, Tensor, backward
from .pipeline import AugmentConfig, SpeckleDataset, augment_batch, make_batches

log = logging.getLogger(__name__)


class TrainingDivergedError(RuntimeError):
    pass


class NonFiniteGradientError(FloatingPointError):
    pass


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 100
    batch_size: int = 16
    learning_rate: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    adam_eps: float = 1e-8
    seed: int = 0
    checkpoint_every: int = 0
    standardize_targets: bool = True
    drop_last: bool = False

    def __post_init__(self):
        if self.epochs < 1:
            raise ValueError(f"epochs must be >= 1, got {self.epochs}")
        if self.batch_size < 1:
            raise ValueError(f"batch_size must be >= 1, got {self.batch_size}")
        if not self.learning_rate > 0:
            raise ValueError(f"learning_rate must be positive, got {self.learning_rate}")
        if self.checkpoint_every < 0:
            raise ValueError("checkpoint_every must be >= 0")

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: Mapping) -> "TrainConfig":
        reject_unknown(cls, data, "train")
        return cls(**data)


# ---------------------------------------------------------------------------
# loss and optimiser


def mse_loss(pred: Tensor, target) -> Tensor:
    target = np.asarray(target, dtype=np.float64).reshape(pred.shape)
    if pred.data.size == 0:
        raise ValueError("mse_loss: empty batch")
    diff = T.sub(pred, Tensor(target))
    return T.mean(T.mul(diff, diff))


class Adam:
    """Adam with bias-corrected moments; moments keyed by parameter name."""

    def __init__(self, lr: float = 1e-3, beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8):
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.t = 0
        self.m: Dict[str, np.ndarray] = {}
        self.v: Dict[str, np.ndarray] = {}

    def step(self, params: Mapping[str, Tensor], grads: Mapping[str, np.ndarray]) -> None:
        for name, g in grads.items():
            if not np.all(np.isfinite(g)):
                bad = int(np.size(g) - np.count_nonzero(np.isfinite(g)))
                raise NonFiniteGradientError(f"non-finite gradient for parameter '{name}' "
                                             f"({bad} of {np.size(g)} entries)")
        self.t += 1
        b1, b2 = self.beta1, self.beta2
        c1 = 1.0 - b1 ** self.t
        c2 = 1.0 - b2 ** self.t
        for name, g in grads.items():
            p = params[name]
            m = self.m.get(name)
            if m is None:
                m = self.m[name] = np.zeros_like(p.data)
                self.v[name] = np.zeros_like(p.data)
            v = self.v[name]
            m *= b1
            m += (1.0 - b1) * g
            v *= b2
            v += (1.0 - b2) * (g * g)
            p.data = p.data - self.lr * (m / c1) / (np.sqrt(v / c2) + self.eps)


# ---------------------------------------------------------------------------
# metrics


@dataclass
class MetricsReport:
    split: str
    n: int
    mse: float
    mae: float
    rmse: float
    max_error: float
    r2: Optional[float]
    config_hash: str = ""
    seed: Optional[int] = None

    def to_dict(self) -> dict:
        return {
            "split": self.split,
            "n": self.n,
            "mse": self.mse,
            "mae": self.mae,
            "rmse": self.rmse,
            "max_error": self.max_error,
            "r2": self.r2,
            "config_hash": self.config_hash,
            "seed": self.seed,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=2)

    def to_csv(self) -> str:
        buf = io.StringIO()
        d = self.to_dict()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(sorted(d))
        w.writerow(["" if d[k] is None else d[k] for k in sorted(d)])
        return buf.getvalue()


def regression_metrics(pred, target, split: str = "", config_hash: str = "",
                       seed: Optional[int] = None) -> MetricsReport:
    """MSE, MAE, RMSE, max absolute error and R^2 (``None`` for constant targets)."""
    pred = np.asarray(pred, dtype=np.float64).reshape(-1)
    target = np.asarray(target, dtype=np.float64).reshape(-1)
    if pred.shape != target.shape:
        raise ValueError(f"prediction/target length mismatch: {pred.size} vs {target.size}")
    if pred.size == 0:
        raise ValueError("cannot compute metrics on an empty set")
    err = pred - target
    mse = float(np.mean(err * err))
    ss_res = float(np.sum(err * err))
    ss_tot = float(np.sum((target - target.mean()) ** 2))
    r2 = None if ss_tot == 0.0 else 1.0 - ss_res / ss_tot
    return MetricsReport(split, int(pred.size), mse, float(np.mean(np.abs(err))), math.sqrt(mse),
                         float(np.max(np.abs(err))), r2, config_hash, seed)


def evaluate(model: PrionViT, state: MemoryState, dataset: SpeckleDataset, split: str = "test",
             batch_size: Optional[int] = None, seed: Optional[int] = None) -> MetricsReport:
    """Score ``dataset`` in eval mode (dropout off).

    The default single batch makes the metrics independent of sample order
    under frozen memory; an explicit ``batch_size`` trades that for memory.
    """
    if len(dataset) == 0:
        raise ValueError("evaluate: empty dataset")
    if model.config.memory_enabled and model.config.inference_memory != "frozen":
        log.warning("evaluating with online memory: metrics depend on sample order")
    pred = model.predict(dataset.images, state, batch_size)
    return regression_metrics(pred, dataset.labels, split, model.config.hash(), seed)


# ---------------------------------------------------------------------------
# training loop


@dataclass
class EpochRecord:
    epoch: int
    train_loss: float
    val_mse: Optional[float]
    val_mae: Optional[float]
    val_rmse: Optional[float]
    val_max_error: Optional[float]
    val_r2: Optional[float]
    wall_time: float


@dataclass
class TrainHistory:
    records: List[EpochRecord] = field(default_factory=list)
    best_epoch: Optional[int] = None

    def __len__(self) -> int:
        return len(self.records)

    def train_losses(self) -> List[float]:
        return [r.train_loss for r in self.records]

    def deterministic_view(self) -> List[tuple]:
        """Every field except wall-clock time, for reproducibility checks."""
        return [tuple(v for k, v in asdict(r).items() if k != "wall_time") for r in self.records]

    def to_dict(self) -> dict:
        return {"best_epoch": self.best_epoch, "records": [asdict(r) for r in self.records]}

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=2)

    def to_csv(self) -> str:
        buf = io.StringIO()
        names = list(EpochRecord.__dataclass_fields__)
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(names)
        for r in self.records:
            row = asdict(r)
            w.writerow(["" if row[k] is None else repr(row[k]) if isinstance(row[k], float) else row[k]
                        for k in names])
        return buf.getvalue()


@dataclass
class TrainResult:
    model: PrionViT
    state: MemoryState
    history: TrainHistory
    optimizer: Adam


def snapshot(model: PrionViT) -> PrionViT:
    copy = PrionViT(model.config, model.seed,
                    {k: Tensor(v.data.copy(), requires_grad=True, name=k) for k, v in model.params.items()})
    copy.target_shift = model.target_shift
    copy.target_scale = model.target_scale
    return copy


def _checkpoint(model, state, opt, epoch, rng_state=None) -> Checkpoint:
    return Checkpoint(snapshot(model), state.copy(), epoch, {k: v.copy() for k, v in opt.m.items()},
                      {k: v.copy() for k, v in opt.v.items()}, opt.t, rng_state)


def train(model: PrionViT, train_set: SpeckleDataset, val_set: Optional[SpeckleDataset],
          config: TrainConfig, augment: Optional[AugmentConfig] = None,
          checkpoint_dir=None) -> TrainResult:
    """Fit ``model`` in place.

    Each epoch reshuffles the training set, augments it, runs stateful
    train-mode passes with MSE loss and Adam, then scores the validation
    split in eval mode. The weights and memory from the epoch with the best
    validation MAE are restored at the end (the last epoch when there is no
    validation split). The memory starts at zero once and is never reset
    between epochs.
    """
    if len(train_set) == 0:
        raise ValueError("train: empty training split")
    augment = augment or AugmentConfig(enabled=False)
    if config.standardize_targets:
        model.target_shift = float(np.mean(train_set.labels))
        scale = float(np.std(train_set.labels))
        model.target_scale = scale if scale > 0 else 1.0

    opt = Adam(config.learning_rate, config.beta1, config.beta2, config.adam_eps)
    state = model.initial_state()
    history = TrainHistory()
    ckpt_dir = Path(checkpoint_dir) if checkpoint_dir is not None else None
    best = None
    ids = np.arange(len(train_set))
    last_good = _checkpoint(model, state, opt, 0)

    for epoch in range(1, config.epochs + 1):
        t0 = time.perf_counter()
        batches = make_batches(ids, config.batch_size, make_rng(config.seed, 1, epoch), config.drop_last)
        total, count = 0.0, 0
        for bi, idx in enumerate(batches):
            images = augment_batch(train_set.images[idx], augment, config.seed, epoch, idx)
            drop_rng = make_rng(config.seed, 2, epoch, bi)
            with Tape() as tape:
                pred, new_state = model.forward(images, state, TRAIN, drop_rng)
                loss = mse_loss(pred, train_set.labels[idx])
            value = loss.item()
            if not math.isfinite(value):
                if ckpt_dir is not None:
                    save_checkpoint(ckpt_dir / "last_good.npz", last_good)
                raise TrainingDivergedError(f"non-finite loss at epoch {epoch}, batch {bi}")
            grads = backward(loss, tape, wrt=model.parameters())
            opt.step(model.params, {name: grads[p] for name, p in model.params.items()})
            state = new_state
            total += value * len(idx)
            count += len(idx)

        vm = evaluate(model, state, val_set, "val") if val_set is not None and len(val_set) else None
        history.records.append(EpochRecord(
            epoch, total / count,
            vm.mse if vm else None, vm.mae if vm else None, vm.rmse if vm else None,
            vm.max_error if vm else None, vm.r2 if vm else None,
            time.perf_counter() - t0,
        ))
        log.info("epoch %d train_loss=%.6g val_mae=%s", epoch, total / count, vm.mae if vm else "-")
        score = vm.mae if vm else -epoch
        if best is None or score < best[0]:
            best = (score, epoch, model.get_weights(), state.copy())
        last_good = _checkpoint(model, state, opt, epoch)
        if ckpt_dir is not None and config.checkpoint_every and epoch % config.checkpoint_every == 0:
            save_checkpoint(ckpt_dir / f"checkpoint_epoch{epoch:04d}.npz", last_good)

    _, best_epoch, weights, best_state = best
    model.set_weights(weights)
    history.best_epoch = best_epoch
    return TrainResult(model, best_state, history, opt)
