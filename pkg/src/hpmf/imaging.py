"""Image tensors, observation sampling and quality metrics."""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import numpy as np
from PIL import Image
from scipy.signal import convolve2d

from .errors import (
    ImageTooSmall,
    MaskSizeMismatch,
    ShapeMismatch,
    SrOutOfRange,
    ZeroReference,
)
from .solver import ObservationProblem
from .tensor_core import frobenius_norm

SSIM_WINDOW = 11
SSIM_SIGMA = 1.5
SSIM_K1 = 0.01
SSIM_K2 = 0.03


def as_image_tensor(data) -> np.ndarray:
    """Validate an ``(H, W, 3)`` array and clamp it to ``[0, 1]``.

    2-D input is promoted to three identical channels.
    """
    arr = np.asarray(data, dtype=np.float64)
    if arr.ndim == 2:
        arr = np.repeat(arr[:, :, None], 3, axis=2)
    if arr.ndim != 3 or arr.shape[2] != 3:
        raise ShapeMismatch(f"expected an (H, W, 3) image, got {arr.shape}")
    return np.clip(arr, 0.0, 1.0)


def _normalized(arr: np.ndarray) -> np.ndarray:
    if arr.dtype == bool:
        return arr.astype(np.float64)
    if np.issubdtype(arr.dtype, np.integer):
        return arr.astype(np.float64) / np.iinfo(arr.dtype).max
    return arr.astype(np.float64)


def load_image(path) -> np.ndarray:
    """Read an image file as an ``(H, W, 3)`` tensor in ``[0, 1]``."""
    with Image.open(path) as im:
        if im.mode not in ("L", "RGB"):
            im = im.convert("RGB" if im.mode in ("RGBA", "P", "CMYK", "LA") else "L")
        arr = np.asarray(im)
    return as_image_tensor(_normalized(arr))


def quantize(img) -> np.ndarray:
    """Clamp to ``[0, 1]`` and round to 8-bit."""
    return np.round(np.clip(np.asarray(img, dtype=np.float64), 0.0, 1.0) * 255.0).astype(np.uint8)


def save_image(path, img) -> None:
    Image.fromarray(quantize(img), mode="RGB").save(path, format="PNG")


def load_mask(path, shape) -> np.ndarray:
    """Observation mask from an image file, broadcast over channels.

    Pixels darker than 0.5 (after averaging RGB channels) are missing.
    """
    with Image.open(path) as im:
        if im.mode not in ("1", "L", "I", "I;16", "F", "RGB"):
            im = im.convert("RGB")
        arr = _normalized(np.asarray(im))
    if arr.ndim == 3:
        arr = arr[:, :, :3].mean(axis=2)
    if arr.shape != tuple(shape[:2]):
        raise MaskSizeMismatch(f"mask {arr.shape} does not match image {tuple(shape[:2])}")
    observed = arr >= 0.5
    return np.repeat(observed[:, :, None], shape[2], axis=2)


@dataclass(frozen=True)
class SamplingSpec:
    """How to choose the observed entries.

    ``kind`` is ``"uniform_random"`` (uses `sr` and `seed`) or
    ``"mask_file"`` (uses `mask_path`).
    """

    kind: str = "uniform_random"
    sr: float = 0.2
    mask_path: Optional[Path] = None
    seed: int = 0

    def __post_init__(self):
        if self.kind == "uniform_random":
            if not 0.0 < self.sr <= 1.0:
                raise SrOutOfRange(f"sampling ratio must lie in (0, 1], got {self.sr}")
        elif self.kind == "mask_file":
            if self.mask_path is None:
                raise ValueError("mask_file sampling needs a mask_path")
        else:
            raise ValueError(f"unknown sampling kind {self.kind!r}")


def observed_count(sr: float, total: int) -> int:
    """``round(sr * total)`` with halves rounded away from zero."""
    return int(math.floor(sr * total + 0.5))


def uniform_mask(shape, sr: float, seed: int) -> np.ndarray:
    """Boolean mask with exactly ``round(sr * size)`` entries drawn without replacement."""
    if not 0.0 < sr <= 1.0:
        raise SrOutOfRange(f"sampling ratio must lie in (0, 1], got {sr}")
    total = int(np.prod(shape))
    rng = np.random.default_rng(seed)
    picked = rng.choice(total, size=observed_count(sr, total), replace=False)
    mask = np.zeros(total, dtype=bool)
    mask[picked] = True
    return mask.reshape(shape, order="F")


def make_observation(img, spec: SamplingSpec) -> ObservationProblem:
    img = as_image_tensor(img)
    if spec.kind == "uniform_random":
        mask = uniform_mask(img.shape, spec.sr, spec.seed)
    else:
        mask = load_mask(spec.mask_path, img.shape)
    return ObservationProblem(img, mask)


def psnr(x, t) -> float:
    """Peak signal-to-noise ratio in dB, peak taken as ``max(t)``.

    Returns ``inf`` for a perfect reconstruction.
    """
    x = np.asarray(x, dtype=np.float64)
    t = np.asarray(t, dtype=np.float64)
    if x.shape != t.shape:
        raise ShapeMismatch(f"shapes differ: {x.shape} vs {t.shape}")
    err = frobenius_norm(x - t) ** 2
    if err == 0.0:
        return math.inf
    return 10.0 * math.log10(float(t.max()) ** 2 / err * t.size)


def rse(x, t) -> float:
    x = np.asarray(x, dtype=np.float64)
    t = np.asarray(t, dtype=np.float64)
    if x.shape != t.shape:
        raise ShapeMismatch(f"shapes differ: {x.shape} vs {t.shape}")
    ref = frobenius_norm(t)
    if ref == 0.0:
        raise ZeroReference("reference tensor has zero norm")
    return frobenius_norm(x - t) / ref


def gaussian_window(size: int = SSIM_WINDOW, sigma: float = SSIM_SIGMA) -> np.ndarray:
    ax = np.arange(size) - (size - 1) / 2.0
    g = np.exp(-(ax**2) / (2.0 * sigma**2))
    w = np.outer(g, g)
    return w / w.sum()


def ssim_map(x, y, data_range: float = 1.0) -> np.ndarray:
    """SSIM index over all fully contained 11x11 windows of two 2-D images."""
    w = gaussian_window()
    c1 = (SSIM_K1 * data_range) ** 2
    c2 = (SSIM_K2 * data_range) ** 2

    def filt(a):
        return convolve2d(a, w, mode="valid")

    mx, my = filt(x), filt(y)
    sxx = filt(x * x) - mx * mx
    syy = filt(y * y) - my * my
    sxy = filt(x * y) - mx * my
    num = (2 * mx * my + c1) * (2 * sxy + c2)
    den = (mx * mx + my * my + c1) * (sxx + syy + c2)
    return num / den


def ssim(x, t) -> float:
    """Mean single-scale SSIM, averaged over the three channels."""
    x = np.asarray(x, dtype=np.float64)
    t = np.asarray(t, dtype=np.float64)
    if x.shape != t.shape:
        raise ShapeMismatch(f"shapes differ: {x.shape} vs {t.shape}")
    if x.ndim == 2:
        x, t = x[:, :, None], t[:, :, None]
    if x.shape[0] < SSIM_WINDOW or x.shape[1] < SSIM_WINDOW:
        raise ImageTooSmall(f"SSIM needs at least {SSIM_WINDOW}x{SSIM_WINDOW} pixels")
    vals = [ssim_map(x[:, :, c], t[:, :, c]).mean() for c in range(x.shape[2])]
    return float(np.mean(vals))


def _piecewise_constant(rng, n: int, pieces: int) -> np.ndarray:
    pieces = max(1, min(pieces, n))
    cuts = np.sort(rng.choice(np.arange(1, n), pieces - 1, replace=False)) if pieces > 1 else []
    lengths = np.diff(np.r_[0, cuts, n]).astype(int)
    return np.repeat(rng.uniform(0.2, 1.0, pieces), lengths)


def synthetic_lowrank(shape, rank: int, pieces: int = 4, seed: int = 0) -> np.ndarray:
    """Sum of `rank` outer products of piecewise-constant factors, scaled to max 1.

    Spatial modes get piecewise-constant factors; the last mode gets
    uniform random loadings.
    """
    rng = np.random.default_rng(seed)
    factors = [
        np.stack([_piecewise_constant(rng, n, pieces) for _ in range(rank)], axis=1)
        for n in shape[:-1]
    ]
    factors.append(rng.uniform(0.2, 1.0, (shape[-1], rank)))
    out = factors[0]
    for f in factors[1:]:
        out = np.einsum("...r,kr->...kr", out, f)
    out = out.sum(axis=-1)
    return out / out.max()
