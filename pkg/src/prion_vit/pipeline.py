"""Preprocessing, augmentation, splitting and batching of specklegram samples."""

from __future__ import annotations

import hashlib
import struct
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Iterator, List, Sequence, Tuple

import numpy as np
from scipy import ndimage

from .numerics.rng import make_rng
from .specklegen import load_image, read_manifest

SOBEL_X = np.array([[-1.0, 0.0, 1.0], [-2.0, 0.0, 2.0], [-1.0, 0.0, 1.0]])
SOBEL_Y = SOBEL_X.T.copy()

CACHE_MAGIC = b"SPKL"
CACHE_VERSION = 1


@dataclass(frozen=True)
class SplitSpec:
    train_frac: float = 0.7
    test_frac: float = 0.2
    val_frac: float = 0.1
    seed: int = 0

    def __post_init__(self):
        fracs = (self.train_frac, self.test_frac, self.val_frac)
        if any(f <= 0 for f in fracs):
            raise ValueError(f"split fractions must be positive, got {fracs}")
        if abs(sum(fracs) - 1.0) > 1e-9:
            raise ValueError(f"split fractions must sum to 1, got {sum(fracs)}")


@dataclass(frozen=True)
class AugmentConfig:
    enabled: bool = True
    gaussian_noise_sigma: float = 0.02
    flip_horizontal: float = 0.5
    flip_vertical: float = 0.5
    brightness_delta: float = 0.1
    rotation_deg: float = 15.0

    def __post_init__(self):
        vals = asdict(self)
        for k, v in vals.items():
            if k != "enabled" and not np.isfinite(v):
                raise ValueError(f"augment.{k} must be finite")
        if self.gaussian_noise_sigma < 0:
            raise ValueError("augment.gaussian_noise_sigma must be >= 0")
        for k in ("flip_horizontal", "flip_vertical"):
            if not 0.0 <= vals[k] <= 1.0:
                raise ValueError(f"augment.{k} is a probability in [0, 1]")

    @classmethod
    def identity(cls) -> "AugmentConfig":
        return cls(True, 0.0, 0.0, 0.0, 0.0, 0.0)


def sobel(gray: np.ndarray) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Horizontal/vertical Sobel responses and gradient magnitude.

    Borders are handled by reflecting the image (``d c b | a b c d | c b a``),
    so output size equals input size. Kernels are applied in correlation
    orientation, so a left-to-right increasing ramp has positive ``gx``.
    The difference is taken before the 1-2-1 smoothing, which keeps flat
    regions exactly zero.
    """
    g = np.asarray(gray, dtype=np.float64)
    if g.ndim != 2 or g.shape[0] < 3 or g.shape[1] < 3:
        raise ValueError(f"sobel needs a 2-D image of at least 3x3, got {g.shape}")
    p = np.pad(g, 1, mode="reflect")
    dx = p[:, 2:] - p[:, :-2]
    gx = dx[:-2] + 2.0 * dx[1:-1] + dx[2:]
    dy = p[2:, :] - p[:-2, :]
    gy = dy[:, :-2] + 2.0 * dy[:, 1:-1] + dy[:, 2:]
    return gx, gy, np.sqrt(gx * gx + gy * gy)


def minmax(channel: np.ndarray) -> np.ndarray:
    lo, hi = channel.min(), channel.max()
    if hi - lo <= 0:
        return np.zeros_like(channel, dtype=np.float64)
    return (channel - lo) / (hi - lo)


def resize_bilinear(img: np.ndarray, out_h: int, out_w: int) -> np.ndarray:
    """Corner-aligned bilinear resize of an (H, W) or (H, W, C) array."""
    if out_h < 1 or out_w < 1:
        raise ValueError(f"target extents must be positive, got {(out_h, out_w)}")
    img = np.asarray(img, dtype=np.float64)
    h, w = img.shape[:2]
    if (h, w) == (out_h, out_w):
        return img.copy()
    ys = np.linspace(0.0, h - 1, out_h) if out_h > 1 else np.zeros(1)
    xs = np.linspace(0.0, w - 1, out_w) if out_w > 1 else np.zeros(1)
    y0 = np.floor(ys).astype(int)
    x0 = np.floor(xs).astype(int)
    y1 = np.minimum(y0 + 1, h - 1)
    x1 = np.minimum(x0 + 1, w - 1)
    wy = ys - y0
    wx = xs - x0
    if img.ndim == 3:
        wy = wy[:, None, None]
        wx = wx[None, :, None]
    else:
        wy = wy[:, None]
        wx = wx[None, :]
    top = img[y0][:, x0] * (1 - wx) + img[y0][:, x1] * wx
    bot = img[y1][:, x0] * (1 - wx) + img[y1][:, x1] * wx
    return top * (1 - wy) + bot * wy


def preprocess(image: np.ndarray, size: int = 128) -> np.ndarray:
    """Specklegram -> (size, size, 3) array of normalised intensity, |gx|, |gy|."""
    img = np.asarray(image, dtype=np.float64)
    if img.ndim == 3:
        img = img.mean(axis=2)
    if img.ndim != 2:
        raise ValueError(f"expected a 2-D grayscale image, got shape {img.shape}")
    gx, gy, _ = sobel(img)
    channels = np.stack([minmax(img), minmax(np.abs(gx)), minmax(np.abs(gy))], axis=-1)
    out = resize_bilinear(channels, size, size)
    return np.clip(out, 0.0, 1.0)


def _rotate(img: np.ndarray, degrees: float) -> np.ndarray:
    if degrees == 0.0:
        return img
    return ndimage.rotate(img, degrees, axes=(1, 0), reshape=False, order=1, mode="reflect")


def augment(image: np.ndarray, cfg: AugmentConfig, rng: np.random.Generator) -> np.ndarray:
    """Random rotate, flip, brightness shift and Gaussian noise, in that order.

    The result is clamped to [0, 1]. Draws from ``rng`` happen in a fixed
    sequence regardless of which transforms are no-ops.
    """
    angle = rng.uniform(-cfg.rotation_deg, cfg.rotation_deg)
    flip_h = rng.random() < cfg.flip_horizontal
    flip_v = rng.random() < cfg.flip_vertical
    shift = rng.uniform(-cfg.brightness_delta, cfg.brightness_delta)
    noise = rng.standard_normal(image.shape) * cfg.gaussian_noise_sigma

    out = _rotate(np.asarray(image, dtype=np.float64), angle)
    if flip_h:
        out = out[:, ::-1]
    if flip_v:
        out = out[::-1, :]
    out = out + shift + noise
    return np.clip(out, 0.0, 1.0)


def split_dataset(n: int, spec: SplitSpec) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Seeded shuffle of ``range(n)`` cut into (train, test, val) by floor counts."""
    if n < 1:
        raise ValueError("cannot split an empty manifest")
    perm = make_rng(spec.seed).permutation(n)
    n_train = int(np.floor(spec.train_frac * n + 1e-9))
    n_test = int(np.floor(spec.test_frac * n + 1e-9))
    return perm[:n_train], perm[n_train:n_train + n_test], perm[n_train + n_test:]


def make_batches(indices: Sequence[int], batch_size: int, rng: np.random.Generator,
                 drop_last: bool = False) -> List[np.ndarray]:
    if batch_size < 1:
        raise ValueError("batch_size must be >= 1")
    order = np.asarray(indices)[rng.permutation(len(indices))]
    stop = len(order) - len(order) % batch_size if drop_last else len(order)
    return [order[i:i + batch_size] for i in range(0, stop, batch_size)]


def split_hash(indices: Sequence[int]) -> str:
    return hashlib.sha256(np.asarray(indices, dtype="<i8").tobytes()).hexdigest()[:16]


@dataclass
class SpeckleDataset:
    """Preprocessed images (n, S, S, 3) with temperature labels (n,)."""

    images: np.ndarray
    labels: np.ndarray
    filenames: List[str]

    def __len__(self) -> int:
        return len(self.labels)

    def subset(self, idx) -> "SpeckleDataset":
        idx = np.asarray(idx, dtype=np.intp)
        return SpeckleDataset(self.images[idx], self.labels[idx], [self.filenames[i] for i in idx])


def load_dataset(manifest_path, size: int = 128) -> SpeckleDataset:
    manifest_path = Path(manifest_path)
    rows = read_manifest(manifest_path)
    if not rows:
        raise ValueError(f"{manifest_path}: manifest is empty")
    root = manifest_path.parent
    images = np.stack([preprocess(load_image(root / name), size) for name, _ in rows])
    labels = np.array([t for _, t in rows], dtype=np.float64)
    if not np.all(np.isfinite(labels)):
        raise ValueError(f"{manifest_path}: non-finite temperature label")
    return SpeckleDataset(images, labels, [name for name, _ in rows])


def augment_batch(images: np.ndarray, cfg: AugmentConfig, seed: int, epoch: int,
                  sample_ids: Sequence[int]) -> np.ndarray:
    """Augment each image with a stream keyed by (epoch, sample id)."""
    if not cfg.enabled:
        return images
    return np.stack([augment(img, cfg, make_rng(seed, epoch, int(i)))
                     for img, i in zip(images, sample_ids)])


# ---------------------------------------------------------------------------
# flat binary cache: b"SPKL", uint32 version, then uint16 channels, height, width
# (16 bytes with 2 bytes pad), followed by float64 little-endian CHW data


def write_cache(path, image: np.ndarray) -> None:
    chw = np.ascontiguousarray(np.transpose(image, (2, 0, 1)), dtype="<f8")
    c, h, w = chw.shape
    header = CACHE_MAGIC + struct.pack("<IHHHxx", CACHE_VERSION, c, h, w)
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(chw.tobytes())


def read_cache(path) -> np.ndarray:
    with open(path, "rb") as fh:
        header = fh.read(16)
        if len(header) != 16 or header[:4] != CACHE_MAGIC:
            raise ValueError(f"{path}: not a preprocessed cache file")
        version, c, h, w = struct.unpack("<IHHHxx", header[4:])
        if version != CACHE_VERSION:
            raise ValueError(f"{path}: unsupported cache version {version}")
        data = np.frombuffer(fh.read(), dtype="<f8")
    if data.size != c * h * w:
        raise ValueError(f"{path}: truncated cache ({data.size} of {c * h * w} values)")
    return data.reshape(c, h, w).transpose(1, 2, 0).astype(np.float64)
