"""Crop-based preprocessing and artifact-invariant augmentations.

Every random decision is drawn from an explicit :class:`RandStream`, so a
transform is a deterministic function of ``(image, config, stream seed)``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, fields

import numpy as np

from .imgcore import as_image, to_gray

__all__ = [
    "AugmentConfig",
    "RandStream",
    "crop",
    "random_crop",
    "center_crop",
    "horizontal_flip",
    "adjust_jitter",
    "color_jitter",
    "rotate",
    "random_rotation",
    "mask_patches",
    "random_mask",
    "augment",
]

JITTER_STAGES = ("brightness", "contrast", "saturation")


@dataclass
class AugmentConfig:
    """Augmentation hyperparameters.

    Defaults follow the reference training recipe: jitter factor 0.5,
    rotation bound 180 degrees, masking with probability 0.5, 16-pixel
    patches and at most 75% of the image masked, 256-pixel crops.
    """

    alpha: float = 0.5
    beta: float = 180.0
    mask_prob: float = 0.5
    patch_size: int = 16
    max_mask_ratio: float = 0.75
    flip_prob: float = 0.5
    crop_size: int = 256
    jitter_order: tuple[str, ...] = JITTER_STAGES
    jitter_shared: bool = False
    # optional robustness-training perturbations, off by default
    blur_prob: float = 0.0
    blur_sigma: tuple[float, float] = (0.1, 2.0)
    jpeg_prob: float = 0.0
    jpeg_quality: tuple[int, int] = (70, 100)

    def __post_init__(self):
        self.jitter_order = tuple(self.jitter_order)
        self.blur_sigma = tuple(self.blur_sigma)
        self.jpeg_quality = tuple(self.jpeg_quality)
        self.validate()

    def validate(self) -> None:
        if not 0.0 <= self.alpha <= 1.0:
            raise ValueError(f"alpha must lie in [0, 1], got {self.alpha}")
        if not 0.0 <= self.beta <= 180.0:
            raise ValueError(f"beta must lie in [0, 180], got {self.beta}")
        for name in ("mask_prob", "flip_prob", "blur_prob", "jpeg_prob"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ValueError(f"{name} must lie in [0, 1], got {v}")
        if int(self.patch_size) != self.patch_size or self.patch_size < 1:
            raise ValueError(f"patch_size must be a positive integer, got {self.patch_size}")
        if not 0.0 < self.max_mask_ratio < 1.0:
            raise ValueError(f"max_mask_ratio must lie in (0, 1), got {self.max_mask_ratio}")
        if int(self.crop_size) != self.crop_size or self.crop_size < 1:
            raise ValueError(f"crop_size must be a positive integer, got {self.crop_size}")
        if sorted(self.jitter_order) != sorted(JITTER_STAGES):
            raise ValueError(f"jitter_order must be a permutation of {JITTER_STAGES}")
        lo, hi = self.blur_sigma
        if not 0.0 < lo <= hi:
            raise ValueError(f"blur_sigma range must satisfy 0 < lo <= hi, got {self.blur_sigma}")
        qlo, qhi = self.jpeg_quality
        if not 1 <= qlo < qhi <= 100:
            raise ValueError(f"jpeg_quality range must satisfy 1 <= lo < hi <= 100, got {self.jpeg_quality}")

    @classmethod
    def disabled(cls, crop_size: int = 256) -> "AugmentConfig":
        """Crop-only configuration: no flip, jitter, rotation or masking."""
        return cls(alpha=0.0, beta=0.0, mask_prob=0.0, flip_prob=0.0, crop_size=crop_size)

    @classmethod
    def from_mapping(cls, values: dict) -> "AugmentConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(values) - known
        if unknown:
            raise ValueError(f"unknown augmentation keys: {sorted(unknown)}")
        return cls(**values)


class RandStream:
    """Seeded uniform stream backed by numpy's PCG64 bit generator.

    PCG64 output is specified bit-for-bit, so equal seeds give equal
    sequences on every platform.
    """

    def __init__(self, seed: int | np.random.SeedSequence = 0):
        if not isinstance(seed, np.random.SeedSequence):
            seed = np.random.SeedSequence(int(seed))
        self.generator = np.random.Generator(np.random.PCG64(seed))

    @classmethod
    def split(cls, seed: int, *keys: int) -> "RandStream":
        """Independent child stream for e.g. ``(seed, epoch, sample_index)``."""
        return cls(np.random.SeedSequence([int(seed), *(int(k) for k in keys)]))

    def random(self) -> float:
        return float(self.generator.random())

    def uniform(self, low: float, high: float) -> float:
        return float(self.generator.uniform(low, high))

    def integers(self, low: int, high: int) -> int:
        """Uniform integer in the closed range ``[low, high]``."""
        return int(self.generator.integers(low, high, endpoint=True))

    def choice(self, n: int, k: int) -> np.ndarray:
        """``k`` distinct indices from ``range(n)``, uniformly without replacement."""
        return self.generator.choice(n, size=k, replace=False)

    def permutation(self, n: int) -> np.ndarray:
        return self.generator.permutation(n)


# -- crops ------------------------------------------------------------------


def _pad_to(x: np.ndarray, size: int) -> np.ndarray:
    _, h, w = x.shape
    ph, pw = max(0, size - h), max(0, size - w)
    if ph == 0 and pw == 0:
        return x
    mode = "reflect" if min(h, w) > 1 else "edge"
    return np.pad(x, ((0, 0), (ph // 2, ph - ph // 2), (pw // 2, pw - pw // 2)), mode=mode)


def crop(x: np.ndarray, top: int, left: int, size: int) -> np.ndarray:
    x = as_image(x)
    _, h, w = x.shape
    if not (0 <= top <= h - size and 0 <= left <= w - size):
        raise ValueError(f"crop window ({top}, {left}, {size}) outside {h}x{w} image")
    return x[:, top:top + size, left:left + size].copy()


def random_crop(x: np.ndarray, size: int, rng: RandStream) -> np.ndarray:
    """Copy a ``size`` x ``size`` window at a uniformly drawn offset.

    Inputs smaller than ``size`` are reflect-padded first; pixels are never
    resampled.
    """
    x = _pad_to(as_image(x), size)
    _, h, w = x.shape
    top = rng.integers(0, h - size)
    left = rng.integers(0, w - size)
    return crop(x, top, left, size)


def center_crop(x: np.ndarray, size: int) -> np.ndarray:
    x = _pad_to(as_image(x), size)
    _, h, w = x.shape
    return crop(x, (h - size) // 2, (w - size) // 2, size)


def horizontal_flip(x: np.ndarray) -> np.ndarray:
    return as_image(x)[:, :, ::-1].copy()


# -- colour jitter ----------------------------------------------------------


def adjust_jitter(x: np.ndarray, brightness: float = 1.0, contrast: float = 1.0,
                  saturation: float = 1.0, order=JITTER_STAGES) -> np.ndarray:
    """Apply brightness, contrast and saturation factors in ``order``.

    Contrast blends toward the mean luma of the image as it stands when the
    stage runs; saturation blends each pixel toward its own luma. The result
    is clamped to [0, 1] after every stage.
    """
    x = as_image(x)
    if x.shape[0] != 3:
        raise ValueError(f"color jitter needs 3 channels, got {x.shape[0]}")
    factors = {"brightness": brightness, "contrast": contrast, "saturation": saturation}
    out = x
    for stage in order:
        f = factors[stage]
        if f == 1.0:
            continue
        if stage == "brightness":
            out = f * out
        elif stage == "contrast":
            out = f * out + (1.0 - f) * to_gray(out).mean()
        else:
            out = f * out + (1.0 - f) * to_gray(out)[None]
        out = np.clip(out, 0.0, 1.0)
    return out.copy() if out is x else out


def color_jitter(x: np.ndarray, cfg: AugmentConfig, rng: RandStream) -> np.ndarray:
    """Jitter with factors drawn from ``U[max(0, 1 - alpha), 1 + alpha]``."""
    lo, hi = max(0.0, 1.0 - cfg.alpha), 1.0 + cfg.alpha
    if cfg.jitter_shared:
        f = rng.uniform(lo, hi)
        fb = fc = fs = f
    else:
        fb, fc, fs = (rng.uniform(lo, hi) for _ in range(3))
    if cfg.alpha == 0.0:
        fb = fc = fs = 1.0
    return adjust_jitter(x, fb, fc, fs, order=cfg.jitter_order)


# -- rotation ---------------------------------------------------------------


def _cos_sin(degrees: float) -> tuple[float, float]:
    # exact values at quarter turns so pixel centres land on pixel centres
    quarter, rem = divmod(degrees, 90.0)
    if rem == 0.0:
        return [(1.0, 0.0), (0.0, 1.0), (-1.0, 0.0), (0.0, -1.0)][int(quarter) % 4]
    rad = math.radians(degrees)
    return math.cos(rad), math.sin(rad)


def rotate(x: np.ndarray, degrees: float) -> np.ndarray:
    """Rotate counter-clockwise about ``((H-1)/2, (W-1)/2)``.

    Inverse mapping with bilinear sampling; source positions outside the
    image read as 0.
    """
    x = as_image(x)
    if degrees == 0.0:
        return x.copy()
    c, h, w = x.shape
    cos, sin = _cos_sin(degrees)
    cy, cx = (h - 1) / 2.0, (w - 1) / 2.0
    dy = np.arange(h, dtype=np.float64)[:, None] - cy
    dx = np.arange(w, dtype=np.float64)[None, :] - cx
    sx = cos * dx - sin * dy + cx
    sy = sin * dx + cos * dy + cy

    padded = np.pad(x, ((0, 0), (1, 1), (1, 1)))
    y0 = np.floor(sy)
    x0 = np.floor(sx)
    fy = sy - y0
    fx = sx - x0
    # shift by one for the zero border; anything further out clamps onto it
    y0i = np.clip(y0.astype(np.intp) + 1, 0, h + 1)
    y1i = np.clip(y0.astype(np.intp) + 2, 0, h + 1)
    x0i = np.clip(x0.astype(np.intp) + 1, 0, w + 1)
    x1i = np.clip(x0.astype(np.intp) + 2, 0, w + 1)
    out = (padded[:, y0i, x0i] * ((1 - fy) * (1 - fx))
           + padded[:, y0i, x1i] * ((1 - fy) * fx)
           + padded[:, y1i, x0i] * (fy * (1 - fx))
           + padded[:, y1i, x1i] * (fy * fx))
    return out


def random_rotation(x: np.ndarray, cfg: AugmentConfig, rng: RandStream) -> np.ndarray:
    theta = rng.uniform(-cfg.beta, cfg.beta)
    if cfg.beta == 0.0:
        theta = 0.0
    return rotate(x, theta)


# -- random mask ------------------------------------------------------------


def mask_patches(x: np.ndarray, ratio: float, patch: int, rng: RandStream):
    """Zero ``floor(H * W * ratio / patch**2)`` disjoint grid-aligned patches.

    Returns
    -------
    out : ndarray
        Masked copy of ``x``.
    mask : ndarray
        ``(H, W)`` binary map, 1 where pixels were zeroed.
    n : int
        Number of patches placed (clamped to the number of grid cells).
    """
    x = as_image(x)
    _, h, w = x.shape
    if patch > min(h, w):
        raise ValueError(f"patch size {patch} exceeds image side {min(h, w)}")
    gh, gw = h // patch, w // patch
    n = min(int(math.floor(h * w * ratio / patch ** 2)), gh * gw)
    mask = np.zeros((h, w), dtype=np.float64)
    if n == 0:
        return x.copy(), mask, 0
    cells = rng.choice(gh * gw, n)
    # patch index grid: cell (r, c) covers rows r*d..r*d+d-1, cols c*d..c*d+d-1
    cell_mask = np.zeros(gh * gw, dtype=bool)
    cell_mask[cells] = True
    block = np.kron(cell_mask.reshape(gh, gw), np.ones((patch, patch), dtype=bool))
    mask[: gh * patch, : gw * patch] = block
    out = x * (1.0 - mask)[None]
    return out, mask, n


def random_mask(x: np.ndarray, cfg: AugmentConfig, rng: RandStream):
    """With probability ``mask_prob`` mask a ratio ``r ~ U[0, max_mask_ratio]``.

    Returns ``(image, mask)``; when the coin says no, the input comes back
    unchanged with an all-zero mask.
    """
    x = as_image(x)
    apply = rng.random() < cfg.mask_prob
    ratio = rng.uniform(0.0, cfg.max_mask_ratio)
    if not apply:
        return x.copy(), np.zeros(x.shape[1:], dtype=np.float64)
    out, mask, _ = mask_patches(x, ratio, cfg.patch_size, rng)
    return out, mask


def augment(x: np.ndarray, cfg: AugmentConfig, rng: RandStream) -> np.ndarray:
    """Training-time pipeline.

    Optional blur/JPEG perturbations, then random crop, horizontal flip,
    colour jitter (colour inputs only), rotation and masking.
    """
    from .perturb import gaussian_blur, jpeg_roundtrip

    x = as_image(x)
    if cfg.blur_prob > 0.0 and rng.random() < cfg.blur_prob:
        x = gaussian_blur(x, rng.uniform(*cfg.blur_sigma))
    if cfg.jpeg_prob > 0.0 and rng.random() < cfg.jpeg_prob:
        qlo, qhi = cfg.jpeg_quality
        x = jpeg_roundtrip(x, rng.integers(qlo, qhi - 1))
    x = random_crop(x, cfg.crop_size, rng)
    if rng.random() < cfg.flip_prob:
        x = horizontal_flip(x)
    if x.shape[0] == 3 and cfg.alpha > 0.0:
        x = color_jitter(x, cfg, rng)
    if cfg.beta > 0.0:
        x = random_rotation(x, cfg, rng)
    if cfg.mask_prob > 0.0:
        x, _ = random_mask(x, cfg, rng)
    return x
