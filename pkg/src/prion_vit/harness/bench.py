"""Single-image inference latency and peak resident memory."""

from __future__ import annotations

import resource
import sys
import time
from dataclasses import asdict, dataclass
from typing import Callable, List, Optional

import numpy as np

from ..model.config import MemoryState
from ..model.network import PrionViT
from ..numerics.rng import make_rng

# Table 2 of the source study, recorded for comparison only
PAPER_TABLE2 = {
    "prion-vit": {"memory_mb": 218.0, "latency_s": 0.045},
    "plain-vit": {"memory_mb": 278.0, "latency_s": 0.092},
}


@dataclass
class BenchReport:
    label: str
    peak_memory_mb: float
    mean_latency_s: float
    n_runs: int
    warmup: int
    input_shape: List[int]
    config_hash: str
    seed: int
    latencies_s: List[float]

    def to_dict(self) -> dict:
        return asdict(self)


def peak_rss_mb() -> float:
    """Peak resident set size of this process so far, in MiB."""
    peak = resource.getrusage(resource.RUSAGE_SELF).ru_maxrss
    # bytes on macOS, kilobytes elsewhere
    return peak / (1024.0 * 1024.0) if sys.platform == "darwin" else peak / 1024.0


def bench_inference(model: PrionViT, state: Optional[MemoryState], n_runs: int = 20, warmup: int = 3,
                    label: str = "", seed: int = 0,
                    clock: Callable[[], float] = time.perf_counter,
                    image: Optional[np.ndarray] = None) -> BenchReport:
    """Mean wall time of eval-mode single-image forwards; warmup runs are not timed."""
    if n_runs < 1:
        raise ValueError("n_runs must be >= 1")
    if warmup < 0:
        raise ValueError("warmup must be >= 0")
    c = model.config
    if image is None:
        image = make_rng(seed, 99).random((1, c.input_size, c.input_size, c.in_channels))
    state = state if state is not None else model.initial_state()
    for _ in range(warmup):
        model.predict(image, state)
    times = []
    for _ in range(n_runs):
        t0 = clock()
        model.predict(image, state)
        times.append(clock() - t0)
    return BenchReport(label or ("prion-vit" if c.memory_enabled else "plain-vit"), peak_rss_mb(),
                       float(np.mean(times)), n_runs, warmup, list(image.shape), c.hash(), int(seed),
                       [float(t) for t in times])
