"""Low-level artifact extractors: single-level DWT, FFT/DCT high-pass, Sobel, Laplace."""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np
from scipy import fft as sfft
from scipy import ndimage

from .imgcore import as_image

__all__ = [
    "FilterBank",
    "BIOR13",
    "SubBands",
    "dwt2_raw",
    "dwt2_single",
    "dwt2_band",
    "extract_hh",
    "fft_highpass",
    "dct_highpass",
    "SOBEL_X",
    "SOBEL_Y",
    "LAPLACE_4",
    "LAPLACE_8",
    "sobel",
    "laplace",
    "ExtractorKind",
    "Extractor",
]

_S2 = math.sqrt(2.0)


@dataclass(frozen=True)
class FilterBank:
    """Analysis filters of a two-channel wavelet filter bank."""

    name: str
    dec_lo: tuple[float, ...]
    dec_hi: tuple[float, ...]

    def __post_init__(self):
        if len(self.dec_lo) != len(self.dec_hi):
            raise ValueError("dec_lo and dec_hi must share a length")

    @property
    def length(self) -> int:
        return len(self.dec_lo)


# biorthogonal 1.3; the high-pass is zero-padded to the low-pass length
BIOR13 = FilterBank(
    name="bior1.3",
    dec_lo=(-_S2 / 16, _S2 / 16, _S2 / 2, _S2 / 2, _S2 / 16, -_S2 / 16),
    dec_hi=(0.0, 0.0, -_S2 / 2, _S2 / 2, 0.0, 0.0),
)


@dataclass(frozen=True)
class SubBands:
    """Four sub-bands of a single-level 2-D DWT.

    ``lh`` is low-pass along width and high-pass along height (it responds to
    horizontal edges); ``hl`` is the transpose case.
    """

    ll: np.ndarray
    lh: np.ndarray
    hl: np.ndarray
    hh: np.ndarray


def _analysis_axis(x: np.ndarray, filt: np.ndarray, axis: int) -> np.ndarray:
    # y[i] = sum_j f[j] * x[2i + 1 - j] with half-sample symmetric extension;
    # yields floor((N + L - 1) / 2) samples.
    x = np.moveaxis(x, axis, -1)
    n = x.shape[-1]
    taps = filt.shape[0]
    pad = taps - 1
    xp = np.pad(x, [(0, 0)] * (x.ndim - 1) + [(pad, pad)], mode="symmetric")
    m = (n + taps - 1) // 2
    y = np.zeros(x.shape[:-1] + (m,))
    for j, fj in enumerate(filt):
        if fj != 0.0:
            start = 1 + pad - j
            y += fj * xp[..., start:start + 2 * m:2]
    return np.moveaxis(y, -1, axis)


def dwt2_raw(x: np.ndarray, fb: FilterBank = BIOR13) -> SubBands:
    """Untrimmed symmetric-mode DWT; each axis yields ``(N + L - 1) // 2`` samples."""
    x = as_image(x)
    lo = np.asarray(fb.dec_lo, dtype=np.float64)
    hi = np.asarray(fb.dec_hi, dtype=np.float64)
    # filter rows (along width) first, then columns (along height)
    row_lo = _analysis_axis(x, lo, axis=2)
    row_hi = _analysis_axis(x, hi, axis=2)
    return SubBands(
        ll=_analysis_axis(row_lo, lo, axis=1),
        lh=_analysis_axis(row_lo, hi, axis=1),
        hl=_analysis_axis(row_hi, lo, axis=1),
        hh=_analysis_axis(row_hi, hi, axis=1),
    )


def _center_trim(band: np.ndarray, h: int, w: int) -> np.ndarray:
    top = (band.shape[1] - h) // 2
    left = (band.shape[2] - w) // 2
    return band[:, top:top + h, left:left + w]


def dwt2_single(x: np.ndarray, fb: FilterBank = BIOR13) -> SubBands:
    """Single-level DWT trimmed to exactly ``C x H/2 x W/2`` per band.

    Raises
    ------
    ValueError
        If H or W is odd; crop to an even size first.
    """
    x = as_image(x)
    _, h, w = x.shape
    if h % 2 or w % 2:
        raise ValueError(f"DWT needs even height and width, got {h}x{w}; crop first")
    raw = dwt2_raw(x, fb)
    return SubBands(*(_center_trim(b, h // 2, w // 2) for b in (raw.ll, raw.lh, raw.hl, raw.hh)))


def dwt2_band(x: np.ndarray, band: str, fb: FilterBank = BIOR13) -> np.ndarray:
    """One trimmed sub-band (``"ll"``, ``"lh"``, ``"hl"`` or ``"hh"``) without computing the others."""
    if band not in ("ll", "lh", "hl", "hh"):
        raise ValueError(f"unknown sub-band {band!r}")
    x = as_image(x)
    _, h, w = x.shape
    if h % 2 or w % 2:
        raise ValueError(f"DWT needs even height and width, got {h}x{w}; crop first")
    lo = np.asarray(fb.dec_lo, dtype=np.float64)
    hi = np.asarray(fb.dec_hi, dtype=np.float64)
    # band names read (width filter, height filter): "lh" = low along width, high along height
    along_w = lo if band[0] == "l" else hi
    along_h = lo if band[1] == "l" else hi
    raw = _analysis_axis(_analysis_axis(x, along_w, axis=2), along_h, axis=1)
    return _center_trim(raw, h // 2, w // 2)


def extract_hh(x: np.ndarray, fb: FilterBank = BIOR13) -> np.ndarray:
    return dwt2_band(x, "hh", fb)


def fft_highpass(x: np.ndarray) -> np.ndarray:
    """Zero the centred low-frequency block ``|i| < H/4 and |j| < W/4`` and invert."""
    x = as_image(x)
    _, h, w = x.shape
    spec = sfft.fftshift(sfft.fft2(x, axes=(1, 2)), axes=(1, 2))
    # centred frequency indices after fftshift
    fi = np.arange(h) - h // 2
    fj = np.arange(w) - w // 2
    low = (np.abs(fi)[:, None] < h / 4) & (np.abs(fj)[None, :] < w / 4)
    spec[:, low] = 0.0
    out = sfft.ifft2(sfft.ifftshift(spec, axes=(1, 2)), axes=(1, 2))
    return out.real


def dct_highpass(x: np.ndarray, delta: float | None = None) -> np.ndarray:
    """Orthonormal DCT-II, zero coefficients with ``i + j < delta``, inverse DCT.

    ``delta`` defaults to ``H / 2``.
    """
    x = as_image(x)
    _, h, w = x.shape
    if delta is None:
        delta = h / 2
    if delta < 0:
        raise ValueError(f"delta must be >= 0, got {delta}")
    coef = sfft.dctn(x, type=2, norm="ortho", axes=(1, 2))
    low = (np.arange(h)[:, None] + np.arange(w)[None, :]) < delta
    coef[:, low] = 0.0
    return sfft.idctn(coef, type=2, norm="ortho", axes=(1, 2))


SOBEL_X = np.array([[-1, 0, 1], [-2, 0, 2], [-1, 0, 1]], dtype=np.float64)
SOBEL_Y = np.array([[-1, -2, -1], [0, 0, 0], [1, 2, 1]], dtype=np.float64)
LAPLACE_4 = np.array([[0, 1, 0], [1, -4, 1], [0, 1, 0]], dtype=np.float64)
LAPLACE_8 = np.array([[1, 1, 1], [1, -8, 1], [1, 1, 1]], dtype=np.float64)


def _conv2_per_channel(x: np.ndarray, kernel: np.ndarray) -> np.ndarray:
    return np.stack([ndimage.convolve(ch, kernel, mode="mirror") for ch in x])


def sobel(x: np.ndarray) -> np.ndarray:
    """Gradient magnitude ``sqrt(gx**2 + gy**2)`` per channel."""
    x = as_image(x)
    gx = _conv2_per_channel(x, SOBEL_X)
    gy = _conv2_per_channel(x, SOBEL_Y)
    return np.hypot(gx, gy)


def laplace(x: np.ndarray, variant: int = 4) -> np.ndarray:
    if variant not in (4, 8):
        raise ValueError(f"laplace variant must be 4 or 8, got {variant}")
    return _conv2_per_channel(as_image(x), LAPLACE_4 if variant == 4 else LAPLACE_8)


class ExtractorKind(str, enum.Enum):
    NAIVE = "naive"
    DWT_LL = "dwt_ll"
    DWT_LH = "dwt_lh"
    DWT_HL = "dwt_hl"
    DWT_HH = "dwt_hh"
    FFT_HI = "fft_hi"
    DCT_HI = "dct_hi"
    SOBEL = "sobel"
    LAPLACE = "laplace"


@dataclass(frozen=True)
class Extractor:
    """An extractor kind plus its parameters; callable on ``(C, H, W)`` images."""

    kind: ExtractorKind = ExtractorKind.DWT_HH
    dct_delta: float | None = None
    laplace_variant: int = 4
    filter_bank: FilterBank = BIOR13

    def __post_init__(self):
        object.__setattr__(self, "kind", ExtractorKind(self.kind))
        if self.laplace_variant not in (4, 8):
            raise ValueError(f"laplace variant must be 4 or 8, got {self.laplace_variant}")
        if self.dct_delta is not None and self.dct_delta < 0:
            raise ValueError(f"dct delta must be >= 0, got {self.dct_delta}")

    def __call__(self, x: np.ndarray) -> np.ndarray:
        kind = self.kind
        if kind is ExtractorKind.NAIVE:
            return as_image(x).copy()
        if kind.value.startswith("dwt_"):
            return dwt2_band(x, kind.value[4:], self.filter_bank)
        if kind is ExtractorKind.FFT_HI:
            return fft_highpass(x)
        if kind is ExtractorKind.DCT_HI:
            return dct_highpass(x, self.dct_delta)
        if kind is ExtractorKind.SOBEL:
            return sobel(x)
        return laplace(x, self.laplace_variant)
