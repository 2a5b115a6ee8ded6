"""End-to-end acceptance checks, one test per criterion.

Each test prints a single ``[ACCEPTANCE n] PASS|FAIL`` line before asserting.
The desk-scale dataset and ablation run are shared between tests.
"""

import json
import math
import time
from dataclasses import replace
from pathlib import Path

import numpy as np
import pytest

from prion_vit.harness import load_config, main
from prion_vit.harness.config_io import SEED_ENV
from prion_vit.harness.runner import fit, make_splits, prepare_dataset
from prion_vit.harness.schemas import ABLATION, BENCH, validate
from prion_vit.model import EVAL, PrionViT, PrionViTConfig, compute_gate, prion_layer_step, update_memory
from prion_vit.model import reference_vit_forward
from prion_vit.numerics import Tensor
from prion_vit.pipeline import SOBEL_X, SOBEL_Y, SplitSpec, sobel, split_dataset
from prion_vit.specklegen import make_mode_set, read_manifest, render_specklegram, zncc
from prion_vit.training import evaluate, regression_metrics
from test_pipeline import brute_force_filter

CONFIGS = Path(__file__).resolve().parents[1] / "configs"
DESK = CONFIGS / "desk.json"
TINY = CONFIGS / "tiny.json"


def verdict(capsys, n: int, title: str, ok: bool, detail: str) -> None:
    with capsys.disabled():
        print(f"\n[ACCEPTANCE {n}] {'PASS' if ok else 'FAIL'} {title}: {detail}")


@pytest.fixture(scope="module", autouse=True)
def _no_seed_env():
    mp = pytest.MonkeyPatch()
    mp.delenv(SEED_ENV, raising=False)
    yield
    mp.undo()


@pytest.fixture(scope="module")
def data_dir(tmp_path_factory):
    return tmp_path_factory.mktemp("desk_data")


@pytest.fixture(scope="module")
def desk_dataset(data_dir):
    cfg = load_config(DESK)
    return prepare_dataset(cfg.data, cfg.model.input_size, data_dir)


@pytest.fixture(scope="module")
def desk_ablation(tmp_path_factory, data_dir, desk_dataset):
    out = tmp_path_factory.mktemp("desk_ablation")
    t0 = time.perf_counter()
    code = main(["ablate", "--config", str(DESK), "--seeds", "0,1,2", "--out-dir", str(out),
                 "--data-dir", str(data_dir), "--log-level", "WARNING"])
    elapsed = time.perf_counter() - t0
    assert code == 0
    return json.loads((out / "ablation.json").read_text()), elapsed


def test_1_gradient_correctness(tmp_path, capsys):
    t0 = time.perf_counter()
    code = main(["gradcheck", "--config", str(TINY), "--out-dir", str(tmp_path), "--log-level", "WARNING"])
    elapsed = time.perf_counter() - t0
    report = json.loads((tmp_path / "gradcheck.json").read_text())
    names = {p["name"] for mode in report["modes"].values() for p in mode["params"]}
    ok = (code == 0 and report["max_rel_err"] < 1e-4 and set(report["modes"]) == {"per_sample", "literal"}
          and {"gate_w", "gate_b"} <= names and elapsed < 60)
    per_mode = ", ".join(f"{m} {r['max_rel_err']:.2e}" for m, r in report["modes"].items())
    verdict(capsys, 1, "gradient check (tiny config, both memory modes)", ok,
            f"max rel err {per_mode}; tol 1e-4; {len(names)} parameter groups; {elapsed:.1f} s")
    assert ok


def test_2_memory_equations(capsys):
    rng = np.random.default_rng(2024)
    d, n = 8, 4

    x = rng.normal(0, 3, (10_000, n, d))
    g = compute_gate(Tensor(x), Tensor(rng.normal(0, 1, (d, d))), Tensor(rng.normal(0, 1, d))).data
    gate_ok = bool(np.all(g > 0) and np.all(g < 1))

    m = rng.normal(size=(n, d))
    xb = rng.normal(size=(5, n, d))
    lim1 = np.max(np.abs(update_memory(Tensor(m), Tensor(xb), Tensor(np.ones_like(xb))).data - m))
    lim0 = np.max(np.abs(update_memory(Tensor(m), Tensor(xb), Tensor(np.zeros_like(xb))).data - xb.mean(0)))
    limits_ok = lim1 <= 1e-12 and lim0 <= 1e-12

    convex_ok = True
    for _ in range(1000):
        lo = rng.uniform(-10, 10)
        hi = lo + rng.uniform(1e-3, 10)
        b = int(rng.integers(1, 6))
        mem = rng.uniform(lo, hi, (n, d))
        xs = rng.uniform(lo, hi, (b, n, d))
        out = update_memory(Tensor(mem), Tensor(xs), Tensor(rng.random((b, n, d)))).data
        convex_ok &= bool(out.min() >= lo and out.max() <= hi)

    collapse_ok = True
    w, bias = Tensor(rng.normal(size=(d, d))), Tensor(rng.normal(size=d))
    cfg = PrionViTConfig(input_size=32, patch_size=16, embed_dim=d, num_blocks=2, num_heads=2, ffn_dim=16,
                         head_hidden=16, memory_mode="literal")
    model = PrionViT(cfg, 5)
    for p in model.parameters():
        p.data = p.data + rng.normal(0, 0.3, p.shape)
    for batch in (2, 4, 8):
        xs, _ = prion_layer_step(Tensor(rng.normal(size=(batch, n, d))), Tensor(m), w, bias, "literal")
        collapse_ok &= all(np.array_equal(xs.data[0], xs.data[i]) for i in range(batch))
        pred, _ = model.forward(rng.random((batch, 32, 32, 3)), None, EVAL)
        collapse_ok &= bool(np.all(pred.data == pred.data[0]))

    ok = gate_ok and limits_ok and convex_ok and collapse_ok
    verdict(capsys, 2, "gated memory unit suite", ok,
            f"gate in (0,1) on 1e4 inputs={gate_ok}; G=1/G=0 limits err {lim1:.1e}/{lim0:.1e}; "
            f"convex bound on 1e3 triples={convex_ok}; literal collapse B=2,4,8={collapse_ok}")
    assert ok


def test_3_plain_vit_equivalence(capsys):
    cfg = replace(load_config(DESK).model, memory_enabled=False)
    model = PrionViT(cfg, 11)
    rng = np.random.default_rng(11)
    for p in model.parameters():
        p.data = p.data + rng.normal(0, 0.1, p.shape)
    weights = model.get_weights()
    mismatches = 0
    for _ in range(100):
        x = rng.random((1, cfg.input_size, cfg.input_size, cfg.in_channels))
        out, _ = model.forward(x, None, EVAL)
        mismatches += not np.array_equal(out.data, reference_vit_forward(weights, x, cfg))
    ok = mismatches == 0
    verdict(capsys, 3, "memory-disabled network equals reference ViT bit for bit", ok,
            f"{100 - mismatches}/100 single-image inputs identical")
    assert ok


def test_4_determinism(desk_dataset, capsys):
    cfg = load_config(DESK)
    splits = make_splits(desk_dataset, cfg.data)
    runs = []
    for _ in range(2):
        res = fit(cfg, splits)
        runs.append((res.history.deterministic_view(), evaluate(res.model, res.state, splits.test).to_dict(),
                     res.state.M.copy()))
    (ha, ma, sa), (hb, mb, sb) = runs
    ok = ha == hb and ma == mb and np.array_equal(sa, sb)
    verdict(capsys, 4, "two identical desk-scale runs", ok,
            f"history equal={ha == hb} ({len(ha)} epochs), test metrics equal={ma == mb}, "
            f"memory equal={np.array_equal(sa, sb)}")
    assert ok


def test_5_directional_ablation(desk_ablation, capsys):
    report, elapsed = desk_ablation
    rows, r2_ok, wins = [], True, 0
    for run in report["runs"]:
        p = run["variants"]["prion-vit"]["test"]
        v = run["variants"]["plain-vit"]["test"]
        r2_ok &= p["r2"] >= 0.90 and v["r2"] >= 0.90
        wins += run["prion_mae_le_plain"]
        rows.append(f"seed {run['seed']}: prion MAE {p['mae']:.3f} (R2 {p['r2']:.4f}) vs "
                    f"plain MAE {v['mae']:.3f} (R2 {v['r2']:.4f})")
    direction_ok = wins >= 2
    ok = report["n_samples"] == 601 and r2_ok and direction_ok and elapsed <= 45 * 60
    verdict(capsys, 5, "memory ablation on 601 synthetic samples", ok,
            f"R2>=0.90 all={r2_ok}; prion MAE <= plain on {wins}/3 seeds (need 2); {elapsed / 60:.1f} min; "
            + "; ".join(rows))
    assert ok


def test_6_dataset_and_pipeline(desk_dataset, data_dir, capsys):
    manifests = list(Path(data_dir).glob("*/manifest.csv"))
    rows = len(read_manifest(manifests[0])) if len(manifests) == 1 else -1
    tr, te, va = split_dataset(601, SplitSpec())
    sizes = (len(tr), len(te), len(va))
    joined = np.concatenate([tr, te, va])
    partition_ok = sizes == (420, 120, 61) and np.array_equal(np.sort(joined), np.arange(601))
    step = np.zeros((12, 12))
    step[:, 6:] = 1.0
    gx, gy, _ = sobel(step)
    sobel_ok = (np.array_equal(gx, brute_force_filter(step, SOBEL_X))
                and np.array_equal(gy, brute_force_filter(step, SOBEL_Y)))
    ok = rows == 601 and len(desk_dataset) == 601 and partition_ok and sobel_ok
    verdict(capsys, 6, "dataset, split and Sobel exactness", ok,
            f"manifest rows {rows}; split {sizes} partition={partition_ok}; step-edge Sobel == oracle: {sobel_ok}")
    assert ok


def test_7_metrics_oracle(desk_ablation, capsys):
    r = regression_metrics([2.0, 4.0, 6.0], [1.0, 5.0, 6.0])
    errs = {"mae": abs(r.mae - 2 / 3), "mse": abs(r.mse - 2 / 3), "rmse": abs(r.rmse - math.sqrt(2 / 3)),
            "max_error": abs(r.max_error - 1.0), "r2": abs(r.r2 - 6 / 7)}
    rmse_printed_ok = abs(r.rmse - 0.81650) < 5e-6
    emitted = [r.to_dict()]
    for run in desk_ablation[0]["runs"]:
        for variant in run["variants"].values():
            emitted += [variant["test"], variant["val"]]
    identity_ok = all(math.isclose(m["rmse"] ** 2, m["mse"], rel_tol=1e-12) for m in emitted)
    ok = max(errs.values()) <= 1e-9 and rmse_printed_ok and identity_ok
    verdict(capsys, 7, "metrics against hand-computed values", ok,
            f"max abs err {max(errs.values()):.1e}; RMSE {r.rmse:.5f}; RMSE^2=MSE on {len(emitted)} reports: "
            f"{identity_ok}")
    assert ok


def test_8_speckle_physics(capsys):
    modes = make_mode_set(0)
    img = render_specklegram(modes, 60.0)
    self_err = abs(zncc(img, img) - 1.0)
    means = []
    for dt in (0.2, 2.0, 20.0):
        vals = []
        for seed in range(20):
            m = make_mode_set(seed)
            vals.append(zncc(render_specklegram(m, 50.0), render_specklegram(m, 50.0 + dt)))
        means.append(float(np.mean(vals)))
    monotone = means[0] >= means[1] >= means[2]
    ok = self_err <= 1e-12 and monotone
    verdict(capsys, 8, "specklegram decorrelation", ok,
            f"|zncc(I,I)-1| = {self_err:.1e}; mean zncc over 20 seeds at dT 0.2/2/20 = "
            + "/".join(f"{v:.4f}" for v in means))
    assert ok


class _FakeClock:
    def __init__(self, increments):
        self.t, self.inc = 0.0, list(increments)

    def __call__(self):
        self.t += self.inc.pop(0)
        return self.t


def test_9_report_schemas(desk_ablation, tmp_path, capsys):
    from prion_vit.harness import bench_inference

    ablation = desk_ablation[0]
    validate(ablation, ABLATION)
    code = main(["bench", "--config", str(DESK), "--out-dir", str(tmp_path), "--n-runs", "5", "--warmup", "2",
                 "--log-level", "WARNING"])
    bench = json.loads((tmp_path / "bench.json").read_text())
    validate(bench, BENCH)
    cfg_hash = load_config(DESK).hash()
    hashes_ok = (bench["config_hash"] == cfg_hash and ablation["config_hash"] == cfg_hash
                 and "seed" in bench and "seed" in ablation)

    model = PrionViT(PrionViTConfig(input_size=16, patch_size=8, embed_dim=4, num_blocks=1, num_heads=1,
                                    ffn_dim=4, head_hidden=4))
    rep = bench_inference(model, None, n_runs=2, warmup=3, clock=_FakeClock([10.0, 0.2, 10.0, 0.6]))
    warmup_ok = rep.mean_latency_s == pytest.approx(0.4, abs=1e-12) and rep.latencies_s == pytest.approx([0.2, 0.6])

    lat = {r["label"]: r["mean_latency_s"] for r in bench["reports"]}
    ok = code == 0 and hashes_ok and warmup_ok
    verdict(capsys, 9, "bench and ablation reports", ok,
            f"schemas valid; hash+seed embedded={hashes_ok}; fake-clock warmup exclusion={warmup_ok}; "
            f"latency prion {lat['prion-vit'] * 1e3:.2f} ms, plain {lat['plain-vit'] * 1e3:.2f} ms")
    assert ok
