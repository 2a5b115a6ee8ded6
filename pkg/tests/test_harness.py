import csv
import json
from pathlib import Path

import jsonschema
import numpy as np
import pytest

from prion_vit.harness import bench_inference, emit_scatter, load_config, main, parse_config, run_ablation
from prion_vit.harness.config_io import SEED_ENV, write_config
from prion_vit.harness.plots import read_scatter_csv
from prion_vit.harness.runner import prepare_dataset
from prion_vit.harness.schemas import ABLATION, BENCH, BENCH_ENTRY, validate
from prion_vit.model import PrionViT, PrionViTConfig

CONFIGS = Path(__file__).resolve().parents[1] / "configs"

QUICK = {
    "model": {"input_size": 16, "patch_size": 8, "embed_dim": 8, "num_blocks": 1, "num_heads": 2,
              "ffn_dim": 8, "head_hidden": 8, "dropout_rate": 0.0},
    "train": {"epochs": 2, "batch_size": 8, "seed": 0},
    "data": {"t_min": 0.0, "t_max": 4.0, "step": 0.25, "image_size": 24, "n_modes": 8},
    "augment": {"enabled": False},
}


@pytest.fixture
def quick_config(tmp_path):
    path = tmp_path / "quick.json"
    path.write_text(json.dumps(QUICK))
    return path


class FakeClock:
    """Each call advances by the next scripted increment."""

    def __init__(self, increments):
        self.t = 0.0
        self.increments = list(increments)

    def __call__(self):
        self.t += self.increments.pop(0) if self.increments else 0.0
        return self.t


def test_parse_config_rejects_unknowns():
    with pytest.raises(ValueError, match="section"):
        parse_config({"optim": {}})
    with pytest.raises(ValueError, match="unknown key"):
        parse_config({"model": {"depth": 3}})
    with pytest.raises(ValueError, match="unknown key"):
        parse_config({"augment": {"blur": 1}})


def test_seed_precedence(quick_config, monkeypatch):
    monkeypatch.delenv(SEED_ENV, raising=False)
    assert load_config(quick_config).seed == 0
    monkeypatch.setenv(SEED_ENV, "7")
    assert load_config(quick_config).seed == 7
    assert load_config(quick_config, seed=3).seed == 3
    monkeypatch.setenv(SEED_ENV, "x")
    with pytest.raises(ValueError):
        load_config(quick_config)


def test_config_hash_tracks_content(quick_config, tmp_path, monkeypatch):
    monkeypatch.delenv(SEED_ENV, raising=False)
    cfg = load_config(quick_config)
    again = load_config(write_config(tmp_path / "copy.json", cfg))
    assert again == cfg and again.hash() == cfg.hash()
    assert cfg.with_seed(1).hash() != cfg.hash()
    assert cfg.with_memory(False).hash() != cfg.hash()


def test_bench_excludes_warmup_with_fake_clock():
    model = PrionViT(PrionViTConfig(input_size=16, patch_size=8, embed_dim=4, num_blocks=1, num_heads=1,
                                    ffn_dim=4, head_hidden=4))
    # warmup predictions do not touch the clock; timed runs read it twice each
    clock = FakeClock([100.0, 0.5, 100.0, 1.5, 100.0, 4.0])
    rep = bench_inference(model, None, n_runs=3, warmup=5, clock=clock)
    assert rep.latencies_s == [0.5, 1.5, 4.0]
    assert rep.mean_latency_s == 2.0
    assert rep.warmup == 5 and rep.n_runs == 3 and rep.label == "prion-vit"
    validate(rep.to_dict(), BENCH_ENTRY)

    single = bench_inference(model, None, n_runs=1, warmup=0, clock=FakeClock([1.0, 0.25]))
    assert single.mean_latency_s == single.latencies_s[0] == 0.25
    with pytest.raises(ValueError):
        bench_inference(model, None, n_runs=0)


def test_bench_real_clock_report_shape():
    model = PrionViT(PrionViTConfig(input_size=16, patch_size=8, embed_dim=4, num_blocks=1, num_heads=1,
                                    ffn_dim=4, head_hidden=4, memory_enabled=False))
    a = bench_inference(model, None, n_runs=3, warmup=1).to_dict()
    b = bench_inference(model, None, n_runs=3, warmup=1).to_dict()
    assert a.keys() == b.keys() and a["label"] == "plain-vit"
    assert a["mean_latency_s"] > 0 and a["peak_memory_mb"] > 0
    assert a["input_shape"] == [1, 16, 16, 3]


def test_scatter_outputs(tmp_path):
    t = np.linspace(0, 120, 601)
    csv_path, svg_path = emit_scatter(t, t, tmp_path)
    with open(csv_path, newline="") as fh:
        rows = list(csv.reader(fh))
    assert rows[0] == ["target_c", "prediction_c"] and len(rows) == 602
    pred, target = read_scatter_csv(csv_path)
    assert np.array_equal(pred, target)
    svg = svg_path.read_text()
    assert svg.startswith("<svg") and svg.count("<circle") == 601 and 'class="identity"' in svg
    with pytest.raises(ValueError):
        emit_scatter([], [], tmp_path)
    with pytest.raises(ValueError):
        emit_scatter([1.0, 2.0], [1.0], tmp_path)


def test_scatter_points_on_identity_line(tmp_path):
    import re

    _, svg_path = emit_scatter([0.0, 50.0, 100.0], [0.0, 50.0, 100.0], tmp_path)
    svg = svg_path.read_text()
    line = re.search(r'x1="([\d.]+)" y1="([\d.]+)" x2="([\d.]+)" y2="([\d.]+)"', svg).groups()
    x1, y1, x2, y2 = map(float, line)
    for cx, cy in re.findall(r'<circle cx="([\d.]+)" cy="([\d.]+)"', svg):
        cx, cy = float(cx), float(cy)
        # collinear with the y=x segment
        assert abs((x2 - x1) * (cy - y1) - (y2 - y1) * (cx - x1)) < 1e-6 * (x2 - x1) ** 2


def test_schema_rejects_missing_hash():
    with pytest.raises(jsonschema.ValidationError):
        validate({"seed": 0, "reports": [], "paper_reference": {}}, BENCH)


def test_ablation_contract(quick_config, tmp_path, monkeypatch):
    monkeypatch.delenv(SEED_ENV, raising=False)
    cfg = load_config(quick_config)
    data = prepare_dataset(cfg.data, cfg.model.input_size, tmp_path)
    report = run_ablation(cfg, [0], data)
    validate(report, ABLATION)
    run = report["runs"][0]
    prion, plain = run["variants"]["prion-vit"], run["variants"]["plain-vit"]
    assert prion["split_hashes"] == plain["split_hashes"]
    assert prion["test"]["n"] == plain["test"]["n"] == report["split_sizes"]["test"]
    assert report["paper_reference"]["prion-vit"]["mae"] == 0.52
    assert report["paper_reference"]["plain-vit"]["mae"] == 1.15
    assert run["delta"]["mae"] == pytest.approx(prion["test"]["mae"] - plain["test"]["mae"])


def test_cli_usage_errors(capsys):
    assert main([]) == 2
    assert main(["train"]) == 2
    assert main(["bench", "--config", "x.json", "--bogus"]) == 2
    assert main(["frobnicate"]) == 2
    assert main(["ablate", "--config", "x.json", "--seeds", "a,b"]) == 2


def test_cli_help_documents_every_flag(capsys):
    assert main(["train", "--help"]) == 0
    out = capsys.readouterr().out
    for flag in ("--config", "--seed", "--out-dir", "--data-dir", "--checkpoint-every", "--log-level"):
        assert flag in out


def test_cli_runtime_failure_exit_code(tmp_path):
    assert main(["train", "--config", str(tmp_path / "missing.json"), "--out-dir", str(tmp_path)]) == 1


def test_cli_end_to_end(quick_config, tmp_path, monkeypatch):
    monkeypatch.delenv(SEED_ENV, raising=False)
    out = tmp_path / "run"
    common = ["--config", str(quick_config), "--out-dir", str(out), "--log-level", "WARNING"]
    assert main(["train", *common]) == 0
    for name in ("checkpoint.npz", "history.csv", "metrics_val.json", "metrics_test.json", "config.json"):
        assert (out / name).exists(), name
    assert main(["eval", *common, "--split", "val"]) == 0
    assert main(["plot", *common]) == 0
    assert (out / "scatter.csv").exists() and (out / "scatter.svg").exists()
    assert main(["bench", *common, "--n-runs", "2", "--warmup", "1"]) == 0
    bench = json.loads((out / "bench.json").read_text())
    validate(bench, BENCH)
    assert [r["label"] for r in bench["reports"]] == ["prion-vit", "plain-vit"]
    assert main(["ablate", *common, "--seeds", "0", "--seed", "5"]) == 0
    ablation = json.loads((out / "ablation.json").read_text())
    validate(ablation, ABLATION)
    assert ablation["seed"] == 0 and ablation["seeds"] == [0]
    metrics = json.loads((out / "metrics_val.json").read_text())
    assert len(metrics["config_hash"]) == 64 and metrics["seed"] == 0


def test_cli_gen_data(tmp_path):
    assert main(["gen-data", "--t-min", "0", "--t-max", "2", "--step", "0.5", "--image-size", "16",
                 "--n-modes", "4", "--out-dir", str(tmp_path)]) == 0
    assert len((tmp_path / "manifest.csv").read_text().splitlines()) == 6
    assert main(["gen-data", "--t-min", "3", "--t-max", "2", "--out-dir", str(tmp_path)]) == 1


def test_cli_gradcheck_tiny_config(tmp_path):
    assert main(["gradcheck", "--config", str(CONFIGS / "tiny.json"), "--out-dir", str(tmp_path)]) == 0
    report = json.loads((tmp_path / "gradcheck.json").read_text())
    assert report["passed"] and report["max_rel_err"] < 1e-4
    assert set(report["modes"]) == {"per_sample", "literal"}
