"""Synthetic temperature-labelled specklegrams.

Each guided mode contributes a fixed transverse field (a band-limited complex
random field) whose phase drifts linearly with temperature. The recorded
specklegram is the normalised intensity of the coherent sum of all modes.
"""

from __future__ import annotations

import csv
import os
from dataclasses import dataclass
from decimal import Decimal
from pathlib import Path
from typing import List, Tuple

import numpy as np
from PIL import Image

from .numerics.rng import make_rng

MANIFEST_HEADER = ("filename", "temperature_c")


class ZeroVarianceError(ValueError):
    """Raised when ZNCC is requested for an image with constant pixels."""


@dataclass(frozen=True)
class FiberModeSet:
    """Fixed per-mode parameters of one simulated fiber.

    Attributes
    ----------
    amplitudes : complex array (M,), unit magnitude
    patterns : complex array (M, H, W), each with unit mean intensity
    base_phases : float array (M,) in [0, 2*pi)
    sensitivities : float array (M,), radians per degree C, all positive
    """

    amplitudes: np.ndarray
    patterns: np.ndarray
    base_phases: np.ndarray
    sensitivities: np.ndarray
    seed: int

    @property
    def n_modes(self) -> int:
        return int(self.amplitudes.shape[0])

    @property
    def size(self) -> Tuple[int, int]:
        return tuple(self.patterns.shape[1:])


def make_mode_set(
    seed: int,
    n_modes: int = 40,
    size: Tuple[int, int] = (126, 126),
    kappa_range: Tuple[float, float] = (0.02, 0.20),
    correlation_px: float = 6.0,
) -> FiberModeSet:
    """Draw a mode set deterministically from ``seed``.

    ``correlation_px`` sets the low-pass cutoff of the transverse fields,
    i.e. the typical speckle grain size in pixels.
    """
    if n_modes < 0:
        raise ValueError("n_modes must be non-negative")
    lo, hi = kappa_range
    if not (0 < lo <= hi):
        raise ValueError(f"kappa_range must satisfy 0 < lo <= hi, got {kappa_range}")
    h, w = size
    rng = make_rng(seed)
    base_phases = rng.uniform(0.0, 2 * np.pi, n_modes)
    amplitudes = np.exp(1j * rng.uniform(0.0, 2 * np.pi, n_modes))
    sensitivities = rng.uniform(lo, hi, n_modes)

    fy = np.fft.fftfreq(h)[:, None]
    fx = np.fft.fftfreq(w)[None, :]
    cutoff = 1.0 / (2.0 * correlation_px)
    lowpass = (fx ** 2 + fy ** 2) <= cutoff ** 2
    noise = rng.standard_normal((n_modes, h, w)) + 1j * rng.standard_normal((n_modes, h, w))
    patterns = np.fft.ifft2(np.fft.fft2(noise) * lowpass)
    if n_modes:
        power = np.mean(np.abs(patterns) ** 2, axis=(1, 2), keepdims=True)
        patterns = patterns / np.sqrt(power)
    return FiberModeSet(amplitudes, patterns, base_phases, sensitivities, int(seed))


def render_specklegram(modes: FiberModeSet, temperature: float) -> np.ndarray:
    """Intensity image in [0, 1] (maximum exactly 1) at ``temperature`` degrees C."""
    if modes.n_modes == 0:
        raise ValueError("cannot render a specklegram from an empty mode set")
    if not np.isfinite(temperature):
        raise ValueError(f"temperature must be finite, got {temperature}")
    coeff = modes.amplitudes * np.exp(1j * (modes.base_phases + modes.sensitivities * temperature))
    field = np.tensordot(coeff, modes.patterns, axes=1)
    intensity = field.real ** 2 + field.imag ** 2
    peak = intensity.max()
    if peak <= 0:
        raise ValueError("rendered field is identically zero")
    return intensity / peak


def zncc(a: np.ndarray, b: np.ndarray) -> float:
    """Zero-mean normalised cross-correlation of two equal-size images."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise ValueError(f"zncc: image shapes differ: {a.shape} vs {b.shape}")
    da = a - a.mean()
    db = b - b.mean()
    saa = float(np.sum(da * da))
    sbb = float(np.sum(db * db))
    if saa == 0.0 or sbb == 0.0:
        raise ZeroVarianceError("zncc is undefined for a zero-variance image")
    r = float(np.sum(da * db)) / np.sqrt(saa * sbb)
    return min(1.0, max(-1.0, r))


def temperature_grid(t_min: float, t_max: float, step: float) -> List[float]:
    """Inclusive grid ``t_min, t_min+step, ..., t_max`` computed in decimal."""
    if not step > 0:
        raise ValueError(f"step must be positive, got {step}")
    if not t_min < t_max:
        raise ValueError(f"t_min must be below t_max, got {t_min} >= {t_max}")
    lo, hi, st = (Decimal(repr(float(v))) for v in (t_min, t_max, step))
    n = int((hi - lo) / st)
    grid = [float(lo + i * st) for i in range(n + 1)]
    return grid


def speckle_filename(temperature: float, width: int = 6) -> str:
    milli = int(round(temperature * 1000))
    sign = "m" if milli < 0 else ""
    return f"speckle_T{sign}{abs(milli):0{width}d}.png"


def quantize(image: np.ndarray) -> np.ndarray:
    return np.clip(np.rint(image * 255.0), 0, 255).astype(np.uint8)


def generate_dataset(
    modes: FiberModeSet,
    t_min: float,
    t_max: float,
    step: float,
    out_dir,
) -> Path:
    """Write one 8-bit PNG per grid temperature plus ``manifest.csv``.

    Returns the manifest path.
    """
    grid = temperature_grid(t_min, t_max, step)
    out = Path(out_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise OSError(f"cannot create output directory {out}: {exc}") from exc
    if not os.access(out, os.W_OK):
        raise PermissionError(f"output directory {out} is not writable")

    rows = []
    for t in grid:
        name = speckle_filename(t)
        Image.fromarray(quantize(render_specklegram(modes, t)), mode="L").save(out / name, optimize=False)
        rows.append((name, f"{t:.1f}"))
    manifest = out / "manifest.csv"
    with open(manifest, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(MANIFEST_HEADER)
        writer.writerows(rows)
    return manifest


def read_manifest(path) -> List[Tuple[str, float]]:
    with open(path, encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or tuple(h.strip() for h in header) != MANIFEST_HEADER:
            raise ValueError(f"{path}: expected header {','.join(MANIFEST_HEADER)}, got {header}")
        return [(row[0], float(row[1])) for row in reader if row]


def load_image(path) -> np.ndarray:
    """Load an 8-bit image file as grayscale float64 in [0, 1]."""
    with Image.open(path) as im:
        arr = np.asarray(im.convert("L"), dtype=np.float64)
    return arr / 255.0
