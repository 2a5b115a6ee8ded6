"""Command-line entry point: ``prion-vit <subcommand> [flags]``.

Exit codes: 0 success, 1 runtime failure, 2 usage error.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import asdict, replace
from pathlib import Path
from typing import List, Optional, Sequence

from ..model.checkpoint import Checkpoint, load_checkpoint, save_checkpoint
from ..model.network import PrionViT
from ..specklegen import generate_dataset, make_mode_set
from ..training import evaluate
from .bench import PAPER_TABLE2, bench_inference
from .config_io import DataConfig, RunConfig, load_config, write_config
from .gradients import check_modes
from .plots import emit_scatter
from .runner import fit, make_splits, prepare_dataset, run_ablation
from .schemas import ABLATION, BENCH, METRICS, validate

log = logging.getLogger("prion_vit")

SPLITS = ("train", "test", "val")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: error: {message}\n{self.format_usage()}")


def write_json(path: Path, payload: dict) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(payload, sort_keys=True, indent=2) + "\n", encoding="utf-8")
    return path


def _parse_seeds(text: str) -> List[int]:
    try:
        seeds = [int(s) for s in text.split(",") if s.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None
    if not seeds:
        raise argparse.ArgumentTypeError("at least one seed is required")
    return seeds


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=None,
                        help="run seed; overrides $PRION_VIT_SEED and the config's train.seed")
    common.add_argument("--out-dir", type=Path, default=Path("."), help="directory for all outputs (default: .)")
    common.add_argument("--log-level", default="INFO", choices=["DEBUG", "INFO", "WARNING", "ERROR"],
                        help="logging verbosity (default: INFO)")

    with_config = argparse.ArgumentParser(add_help=False)
    with_config.add_argument("--config", type=Path, required=True, help="JSON run config")

    with_data = argparse.ArgumentParser(add_help=False)
    with_data.add_argument("--data-dir", type=Path, default=None,
                           help="where synthetic images are rendered and reused (default: <out-dir>/data)")

    with_ckpt = argparse.ArgumentParser(add_help=False)
    with_ckpt.add_argument("--checkpoint", type=Path, default=None,
                           help="trained checkpoint (default: <out-dir>/checkpoint.npz)")

    parser = _Parser(prog="prion-vit", description="Memory-gated vision transformer for specklegram thermometry.")
    sub = parser.add_subparsers(dest="command", metavar="<command>", parser_class=_Parser)

    g = sub.add_parser("gen-data", parents=[common], help="render a synthetic specklegram set and manifest")
    g.add_argument("--config", type=Path, default=None, help="optional JSON config; its data section sets defaults")
    g.add_argument("--t-min", type=float, default=None, help="lowest temperature in degC (default 0)")
    g.add_argument("--t-max", type=float, default=None, help="highest temperature in degC, inclusive (default 120)")
    g.add_argument("--step", type=float, default=None, help="temperature step in degC (default 0.2)")
    g.add_argument("--n-modes", type=int, default=None, help="number of guided modes (default 40)")
    g.add_argument("--image-size", type=int, default=None, help="rendered image side in pixels (default 126)")

    t = sub.add_parser("train", parents=[common, with_config, with_data], help="train one model")
    t.add_argument("--checkpoint-every", type=int, default=None,
                   help="also save a checkpoint every N epochs under <out-dir>/checkpoints")

    e = sub.add_parser("eval", parents=[common, with_config, with_data, with_ckpt], help="score a checkpoint")
    e.add_argument("--split", choices=SPLITS, default="test", help="which split to score (default: test)")

    a = sub.add_parser("ablate", parents=[common, with_config, with_data],
                       help="train with and without memory on identical data and compare")
    a.add_argument("--seeds", type=_parse_seeds, default=None,
                   help="comma-separated seeds (default: the run seed)")

    b = sub.add_parser("bench", parents=[common, with_config],
                       help="single-image inference latency and peak memory, with and without memory")
    b.add_argument("--n-runs", type=int, default=50, help="timed runs (default: 50)")
    b.add_argument("--warmup", type=int, default=5, help="untimed warmup runs (default: 5)")

    c = sub.add_parser("gradcheck", parents=[common, with_config],
                       help="finite-difference check of every parameter gradient")
    c.add_argument("--h", type=float, default=1e-4, help="relative step (default: 1e-4)")
    c.add_argument("--tol", type=float, default=1e-4, help="max relative error allowed (default: 1e-4)")
    c.add_argument("--batch", type=int, default=3, help="batch size of the checked pass (default: 3)")

    p = sub.add_parser("plot", parents=[common, with_config, with_data, with_ckpt],
                       help="write scatter.csv and scatter.svg of predictions vs targets")
    p.add_argument("--split", choices=SPLITS, default="test", help="which split to plot (default: test)")
    return parser


def _data_dir(args) -> Path:
    return args.data_dir if args.data_dir is not None else args.out_dir / "data"


def _splits(cfg: RunConfig, args):
    dataset = prepare_dataset(cfg.data, cfg.model.input_size, _data_dir(args))
    return dataset, make_splits(dataset, cfg.data)


def _load_trained(cfg: RunConfig, args) -> Checkpoint:
    path = args.checkpoint or args.out_dir / "checkpoint.npz"
    ckpt = load_checkpoint(path)
    if ckpt.model.config != cfg.model:
        raise ValueError(f"{path} was trained with a different model config")
    return ckpt


def cmd_gen_data(args) -> int:
    base = load_config(args.config, args.seed).data if args.config else DataConfig()
    overrides = {"t_min": args.t_min, "t_max": args.t_max, "step": args.step,
                 "n_modes": args.n_modes, "image_size": args.image_size}
    data = DataConfig.from_dict({**asdict(base), **{k: v for k, v in overrides.items() if v is not None}})
    seed = args.seed if args.seed is not None else data.generator_seed
    modes = make_mode_set(seed, data.n_modes, (data.image_size, data.image_size),
                          (data.kappa_min, data.kappa_max), data.correlation_px)
    manifest = generate_dataset(modes, data.t_min, data.t_max, data.step, args.out_dir)
    n = sum(1 for _ in open(manifest, encoding="utf-8")) - 1
    print(f"wrote {n} images and {manifest}")
    return 0


def cmd_train(args) -> int:
    cfg = load_config(args.config, args.seed)
    if args.checkpoint_every is not None:
        cfg = replace(cfg, train=replace(cfg.train, checkpoint_every=args.checkpoint_every))
    _, splits = _splits(cfg, args)
    res = fit(cfg, splits, args.out_dir / "checkpoints")
    out = args.out_dir
    save_checkpoint(out / "checkpoint.npz", Checkpoint(res.model, res.state, res.history.best_epoch,
                                                       extra={"run_config_hash": cfg.hash()}))
    write_config(out / "config.json", cfg)
    (out / "history.csv").write_text(res.history.to_csv(), encoding="utf-8")
    for name in ("val", "test"):
        split = getattr(splits, name)
        if len(split):
            report = evaluate(res.model, res.state, split, name, seed=cfg.seed)
            report.config_hash = cfg.hash()
            write_json(out / f"metrics_{name}.json", report.to_dict())
            print(f"{name}: mae={report.mae:.4f} rmse={report.rmse:.4f} r2={report.r2}")
    return 0


def cmd_eval(args) -> int:
    cfg = load_config(args.config, args.seed)
    ckpt = _load_trained(cfg, args)
    _, splits = _splits(cfg, args)
    report = evaluate(ckpt.model, ckpt.state, getattr(splits, args.split), args.split, seed=cfg.seed)
    report.config_hash = cfg.hash()
    payload = report.to_dict()
    validate(payload, METRICS)
    write_json(args.out_dir / f"metrics_{args.split}.json", payload)
    print(report.to_json())
    return 0


def cmd_ablate(args) -> int:
    cfg = load_config(args.config, args.seed)
    seeds = args.seeds or [cfg.seed]
    dataset = prepare_dataset(cfg.data, cfg.model.input_size, _data_dir(args))
    payload = run_ablation(cfg, seeds, dataset)
    validate(payload, ABLATION)
    write_json(args.out_dir / "ablation.json", payload)
    for run in payload["runs"]:
        p = run["variants"]["prion-vit"]["test"]
        v = run["variants"]["plain-vit"]["test"]
        print(f"seed {run['seed']}: prion mae={p['mae']:.4f} r2={p['r2']:.4f} | "
              f"plain mae={v['mae']:.4f} r2={v['r2']:.4f}")
    s = payload["summary"]
    print(f"prion MAE <= plain MAE on {s['prion_mae_le_plain']}/{s['n_seeds']} seeds")
    return 0


def cmd_bench(args) -> int:
    cfg = load_config(args.config, args.seed)
    reports = []
    for label, enabled in (("prion-vit", True), ("plain-vit", False)):
        model_cfg = cfg.with_memory(enabled).model
        model = PrionViT(model_cfg, cfg.seed)
        reports.append(bench_inference(model, None, args.n_runs, args.warmup, label, cfg.seed).to_dict())
    payload = {"config_hash": cfg.hash(), "seed": cfg.seed, "reports": reports,
               "paper_reference": PAPER_TABLE2}
    validate(payload, BENCH)
    write_json(args.out_dir / "bench.json", payload)
    for r in reports:
        print(f"{r['label']}: {r['mean_latency_s'] * 1e3:.3f} ms, peak rss {r['peak_memory_mb']:.1f} MB")
    return 0


def cmd_gradcheck(args) -> int:
    cfg = load_config(args.config, args.seed)
    results = check_modes(cfg.model, cfg.seed, h=args.h, tol=args.tol, batch=args.batch)
    payload = {"config_hash": cfg.hash(), "seed": cfg.seed,
               "modes": {k: r.to_dict() for k, r in results.items()},
               "max_rel_err": max(r.max_rel_err for r in results.values()),
               "passed": all(r.passed for r in results.values())}
    write_json(args.out_dir / "gradcheck.json", payload)
    for mode, r in results.items():
        print(f"{mode}: max rel err {r.max_rel_err:.3e} ({'pass' if r.passed else 'FAIL'})")
    return 0 if payload["passed"] else 1


def cmd_plot(args) -> int:
    cfg = load_config(args.config, args.seed)
    ckpt = _load_trained(cfg, args)
    _, splits = _splits(cfg, args)
    split = getattr(splits, args.split)
    pred = ckpt.model.predict(split.images, ckpt.state)
    csv_path, svg_path = emit_scatter(pred, split.labels, args.out_dir)
    print(f"wrote {csv_path} and {svg_path}")
    return 0


COMMANDS = {
    "gen-data": cmd_gen_data,
    "train": cmd_train,
    "eval": cmd_eval,
    "ablate": cmd_ablate,
    "bench": cmd_bench,
    "gradcheck": cmd_gradcheck,
    "plot": cmd_plot,
}


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        sys.stderr.write(str(exc))
        return 2
    except SystemExit as exc:  # --help
        return int(exc.code or 0)
    if args.command is None:
        sys.stderr.write(parser.format_usage())
        return 2
    logging.basicConfig(level=args.log_level, format="%(asctime)s %(levelname)s %(name)s: %(message)s")
    try:
        return COMMANDS[args.command](args)
    except Exception as exc:
        log.error("%s failed: %s", args.command, exc)
        log.debug("traceback", exc_info=True)
        return 1


if __name__ == "__main__":
    sys.exit(main())
