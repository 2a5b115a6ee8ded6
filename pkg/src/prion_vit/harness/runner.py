"""Dataset preparation and the memory ablation (Prion-ViT vs plain ViT)."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple

from ..model.config import config_hash
from ..model.network import PrionViT
from ..pipeline import SpeckleDataset, load_dataset, split_dataset, split_hash
from ..specklegen import generate_dataset, make_mode_set
from ..training import MetricsReport, TrainResult, evaluate, train
from .config_io import DataConfig, RunConfig

log = logging.getLogger(__name__)

# Table 1 of the source study (full-scale results, reference only)
PAPER_TABLE1 = {
    "prion-vit": {"mse": 0.46, "mae": 0.52, "rmse": 0.68, "max_error": 2.58, "r2": 0.99},
    "plain-vit": {"mse": 1.95, "mae": 1.15, "rmse": 1.4, "max_error": 3.67, "r2": 0.99},
}

VARIANTS = (("prion-vit", True), ("plain-vit", False))


def synthetic_dir(root, data: DataConfig) -> Path:
    gen = {k: getattr(data, k) for k in ("t_min", "t_max", "step", "n_modes", "kappa_min",
                                         "kappa_max", "correlation_px", "image_size", "generator_seed")}
    return Path(root) / f"speckle_{config_hash(gen)[:12]}"


def render_synthetic(data: DataConfig, out_dir) -> Path:
    modes = make_mode_set(data.generator_seed, data.n_modes, (data.image_size, data.image_size),
                          (data.kappa_min, data.kappa_max), data.correlation_px)
    return generate_dataset(modes, data.t_min, data.t_max, data.step, out_dir)


def prepare_dataset(data: DataConfig, input_size: int, work_dir) -> SpeckleDataset:
    """Load the configured manifest, rendering the synthetic set first if needed."""
    if data.manifest:
        manifest = Path(data.manifest)
    else:
        target = synthetic_dir(work_dir, data)
        manifest = target / "manifest.csv"
        if not manifest.exists():
            log.info("rendering synthetic specklegrams into %s", target)
            render_synthetic(data, target)
    return load_dataset(manifest, input_size)


@dataclass
class Splits:
    train: SpeckleDataset
    test: SpeckleDataset
    val: SpeckleDataset
    hashes: Dict[str, str]


def make_splits(dataset: SpeckleDataset, data: DataConfig) -> Splits:
    tr, te, va = split_dataset(len(dataset), data.split_spec())
    return Splits(dataset.subset(tr), dataset.subset(te), dataset.subset(va),
                  {"train": split_hash(tr), "test": split_hash(te), "val": split_hash(va)})


def fit(cfg: RunConfig, splits: Splits, checkpoint_dir=None) -> TrainResult:
    model = PrionViT(cfg.model, cfg.seed)
    return train(model, splits.train, splits.val, cfg.train, cfg.augment, checkpoint_dir)


def _metrics_dict(report: MetricsReport) -> dict:
    return report.to_dict()


def run_ablation(cfg: RunConfig, seeds: Sequence[int], dataset: SpeckleDataset) -> dict:
    """Train both variants per seed on identical splits; returns the report payload.

    Only ``memory_enabled`` differs between variants. Parameters common to
    both share their initial values because gate parameters are drawn last.
    """
    splits = make_splits(dataset, cfg.data)
    runs: List[dict] = []
    for seed in seeds:
        variants = {}
        for label, enabled in VARIANTS:
            vcfg = cfg.with_seed(seed).with_memory(enabled)
            log.info("ablation seed=%d variant=%s", seed, label)
            res = fit(vcfg, splits)
            test = evaluate(res.model, res.state, splits.test, "test", seed=seed)
            val = evaluate(res.model, res.state, splits.val, "val", seed=seed)
            test.config_hash = val.config_hash = vcfg.hash()
            variants[label] = {
                "config_hash": vcfg.hash(),
                "best_epoch": res.history.best_epoch,
                "epochs": len(res.history),
                "split_hashes": dict(splits.hashes),
                "test": _metrics_dict(test),
                "val": _metrics_dict(val),
            }
        p, v = variants["prion-vit"]["test"], variants["plain-vit"]["test"]
        runs.append({
            "seed": int(seed),
            "variants": variants,
            "delta": {k: (None if p[k] is None or v[k] is None else p[k] - v[k])
                      for k in ("mse", "mae", "rmse", "max_error", "r2")},
            "prion_mae_le_plain": p["mae"] <= v["mae"],
        })
    wins = sum(r["prion_mae_le_plain"] for r in runs)
    return {
        "config_hash": cfg.hash(),
        "seed": int(seeds[0]) if len(seeds) else cfg.seed,
        "seeds": [int(s) for s in seeds],
        "n_samples": len(dataset),
        "split_sizes": {"train": len(splits.train), "test": len(splits.test), "val": len(splits.val)},
        "runs": runs,
        "summary": {"prion_mae_le_plain": wins, "n_seeds": len(runs)},
        "paper_reference": PAPER_TABLE1,
    }
