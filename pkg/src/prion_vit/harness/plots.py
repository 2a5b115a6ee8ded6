"""Prediction-vs-target scatter as CSV plus a dependency-free SVG."""

from __future__ import annotations

import csv
from pathlib import Path
from typing import Sequence, Tuple

import numpy as np

SIZE = 480
MARGIN = 56


def read_scatter_csv(path) -> Tuple[np.ndarray, np.ndarray]:
    with open(path, encoding="utf-8", newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames != ["target_c", "prediction_c"]:
            raise ValueError(f"{path}: expected header target_c,prediction_c")
        rows = [(float(r["target_c"]), float(r["prediction_c"])) for r in reader]
    arr = np.array(rows, dtype=np.float64).reshape(-1, 2)
    return arr[:, 1], arr[:, 0]


def scatter_svg(pred: np.ndarray, target: np.ndarray, title: str = "Predicted vs true temperature") -> str:
    lo = float(min(pred.min(), target.min()))
    hi = float(max(pred.max(), target.max()))
    if hi == lo:
        lo, hi = lo - 1.0, hi + 1.0
    span = SIZE - 2 * MARGIN

    def sx(v):
        return MARGIN + (v - lo) / (hi - lo) * span

    def sy(v):
        return SIZE - MARGIN - (v - lo) / (hi - lo) * span

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{SIZE}" height="{SIZE}" viewBox="0 0 {SIZE} {SIZE}">',
        f'<rect width="{SIZE}" height="{SIZE}" fill="white"/>',
        f'<text x="{SIZE / 2:.1f}" y="24" text-anchor="middle" font-family="sans-serif" font-size="14">{title}</text>',
        f'<rect x="{MARGIN}" y="{MARGIN}" width="{span}" height="{span}" fill="none" stroke="black"/>',
        f'<line class="identity" x1="{sx(lo):.2f}" y1="{sy(lo):.2f}" x2="{sx(hi):.2f}" y2="{sy(hi):.2f}" '
        'stroke="red" stroke-dasharray="4 3"/>',
        f'<text x="{SIZE / 2:.1f}" y="{SIZE - 16}" text-anchor="middle" font-family="sans-serif" '
        'font-size="12">true temperature (&#176;C)</text>',
        f'<text x="16" y="{SIZE / 2:.1f}" text-anchor="middle" font-family="sans-serif" font-size="12" '
        f'transform="rotate(-90 16 {SIZE / 2:.1f})">predicted temperature (&#176;C)</text>',
        f'<text x="{MARGIN}" y="{SIZE - MARGIN + 14}" font-family="sans-serif" font-size="10">{lo:.1f}</text>',
        f'<text x="{SIZE - MARGIN}" y="{SIZE - MARGIN + 14}" text-anchor="end" font-family="sans-serif" '
        f'font-size="10">{hi:.1f}</text>',
    ]
    for t, p in zip(target, pred):
        parts.append(f'<circle cx="{sx(t):.2f}" cy="{sy(p):.2f}" r="2.5" fill="steelblue" fill-opacity="0.7"/>')
    parts.append("</svg>")
    return "\n".join(parts) + "\n"


def emit_scatter(pred: Sequence[float], target: Sequence[float], out_dir) -> Tuple[Path, Path]:
    """Write ``scatter.csv`` and ``scatter.svg`` into ``out_dir``."""
    pred = np.asarray(pred, dtype=np.float64).reshape(-1)
    target = np.asarray(target, dtype=np.float64).reshape(-1)
    if pred.size != target.size:
        raise ValueError(f"length mismatch: {pred.size} predictions vs {target.size} targets")
    if pred.size == 0:
        raise ValueError("nothing to plot")
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    csv_path = out / "scatter.csv"
    with open(csv_path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["target_c", "prediction_c"])
        for t, p in zip(target, pred):
            w.writerow([repr(float(t)), repr(float(p))])
    svg_path = out / "scatter.svg"
    svg_path.write_text(scatter_svg(pred, target), encoding="utf-8")
    return csv_path, svg_path
