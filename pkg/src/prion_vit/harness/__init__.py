"""Experiment harness: configs, ablation runner, benchmark, plots and the CLI."""

from .bench import BenchReport, bench_inference
from .cli import main
from .config_io import DataConfig, RunConfig, load_config, parse_config, write_config
from .gradients import TINY, check_modes, check_network
from .plots import emit_scatter
from .runner import PAPER_TABLE1, make_splits, prepare_dataset, run_ablation

__all__ = [
    "BenchReport", "bench_inference", "main", "DataConfig", "RunConfig", "load_config", "parse_config",
    "write_config", "TINY", "check_modes", "check_network", "emit_scatter", "PAPER_TABLE1",
    "make_splits", "prepare_dataset", "run_ablation",
]
