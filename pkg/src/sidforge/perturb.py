"""Evaluation-time perturbations: Gaussian blur, JPEG round-trip, patch masking."""
from __future__ import annotations

import io
import math
from dataclasses import dataclass

import numpy as np
from PIL import Image
from scipy import ndimage

from .imgcore import _to_uint8, as_image, decode_image
from .transforms import RandStream, mask_patches

__all__ = ["PerturbSpec", "gaussian_kernel", "gaussian_blur", "jpeg_roundtrip", "apply_perturbation"]

PERTURB_KINDS = ("gaussian_blur", "jpeg", "random_mask_eval")


@dataclass(frozen=True)
class PerturbSpec:
    kind: str
    sigma: float = 1.0
    quality: int = 95
    mask_ratio: float = 0.0
    patch_size: int = 16

    def __post_init__(self):
        if self.kind not in PERTURB_KINDS:
            raise ValueError(f"unknown perturbation {self.kind!r}; expected one of {PERTURB_KINDS}")
        if self.sigma <= 0:
            raise ValueError(f"sigma must be > 0, got {self.sigma}")
        if not 1 <= self.quality < 100:
            raise ValueError(f"quality must lie in [1, 100), got {self.quality}")
        if not 0.0 <= self.mask_ratio <= 1.0:
            raise ValueError(f"mask ratio must lie in [0, 1], got {self.mask_ratio}")
        if self.patch_size < 1:
            raise ValueError(f"patch size must be >= 1, got {self.patch_size}")


def gaussian_kernel(sigma: float) -> np.ndarray:
    """Normalised 1-D taps over ``[-ceil(3 sigma), ceil(3 sigma)]``."""
    if sigma <= 0:
        raise ValueError(f"sigma must be > 0, got {sigma}")
    radius = int(math.ceil(3.0 * sigma))
    k = np.arange(-radius, radius + 1, dtype=np.float64)
    taps = np.exp(-(k ** 2) / (2.0 * sigma ** 2))
    return taps / taps.sum()


def gaussian_blur(x: np.ndarray, sigma: float) -> np.ndarray:
    """Separable Gaussian blur with reflect (mirror) boundary handling."""
    x = as_image(x)
    taps = gaussian_kernel(sigma)
    out = ndimage.correlate1d(x, taps, axis=1, mode="mirror")
    return ndimage.correlate1d(out, taps, axis=2, mode="mirror")


def jpeg_roundtrip(x: np.ndarray, quality: int) -> np.ndarray:
    """Encode as baseline JPEG at ``quality`` (IJG table scaling) and decode back.

    Chroma is kept at full resolution (4:4:4) so that quality is the only
    source of loss.
    """
    if not 1 <= quality <= 100:
        raise ValueError(f"quality must lie in [1, 100], got {quality}")
    buf = io.BytesIO()
    Image.fromarray(_to_uint8(x)).save(buf, format="JPEG", quality=int(quality), subsampling=0)
    return decode_image(buf.getvalue())


def apply_perturbation(x: np.ndarray, spec: PerturbSpec | None, rng: RandStream) -> np.ndarray:
    if spec is None:
        return as_image(x)
    if spec.kind == "gaussian_blur":
        return gaussian_blur(x, spec.sigma)
    if spec.kind == "jpeg":
        return jpeg_roundtrip(x, spec.quality)
    out, _, _ = mask_patches(x, spec.mask_ratio, spec.patch_size, rng)
    return out
