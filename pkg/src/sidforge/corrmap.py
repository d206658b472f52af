"""Sliding-window local correlation between window column means and row means."""
from __future__ import annotations

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .imgcore import to_gray

__all__ = ["DEGENERATE_RTOL", "local_correlation_map", "corr_summary"]

# A mean vector whose spread is below this fraction of the window's own
# spread is treated as constant (only rounding separates its entries).
DEGENERATE_RTOL = 1e-10


def _as_gray(img: np.ndarray) -> np.ndarray:
    img = np.asarray(img, dtype=np.float64)
    if img.ndim == 3:
        return to_gray(img)
    if img.ndim != 2:
        raise ValueError(f"expected a 2-D gray image or (C, H, W) image, got shape {img.shape}")
    return img


def _corr_w2(g: np.ndarray) -> np.ndarray:
    # 2x2 window [[a, b], [c, d]]: Pearson of two 2-vectors is
    # sign(r1 - r0) * sign(c1 - c0) whenever both differences are nonzero.
    a, b = g[:-1, :-1], g[:-1, 1:]
    c, d = g[1:, :-1], g[1:, 1:]
    dr = 0.5 * (b + d) - 0.5 * (a + c)
    dc = 0.5 * (c + d) - 0.5 * (a + b)
    spread = np.maximum(np.maximum(a, b), np.maximum(c, d)) - np.minimum(np.minimum(a, b), np.minimum(c, d))
    tol = DEGENERATE_RTOL * spread
    valid = (np.abs(dr) > tol) & (np.abs(dc) > tol)
    return np.where(valid, np.sign(dr) * np.sign(dc), 0.0)


def local_correlation_map(img: np.ndarray, w: int = 2) -> np.ndarray:
    """Pearson correlation per ``w`` x ``w`` window.

    For the window at ``(i, j)`` the vector ``r`` holds the column means and
    ``c`` the row means; the map entry is their Pearson coefficient, or 0
    when either vector is constant.

    Parameters
    ----------
    img : ndarray
        ``(H, W)`` gray image; ``(C, H, W)`` input is converted to luma first.
    w : int
        Window side, at least 2.

    Returns
    -------
    ndarray
        ``(H - w + 1, W - w + 1)`` map with values in [-1, 1].
    """
    g = _as_gray(img)
    if w < 2:
        raise ValueError(f"window size must be >= 2, got {w}")
    h, wd = g.shape
    if h < w or wd < w:
        raise ValueError(f"image {h}x{wd} is smaller than the {w}x{w} window")
    if w == 2:
        return _corr_w2(g)

    win = sliding_window_view(g, (w, w))
    r = win.mean(axis=2)
    c = win.mean(axis=3)
    spread = win.max(axis=(2, 3)) - win.min(axis=(2, 3))
    tol = DEGENERATE_RTOL * spread
    valid = (np.ptp(r, axis=-1) > tol) & (np.ptp(c, axis=-1) > tol)
    rc = r - r.mean(axis=-1, keepdims=True)
    cc = c - c.mean(axis=-1, keepdims=True)
    cov = (rc * cc).mean(axis=-1)
    denom = np.sqrt((rc * rc).mean(axis=-1)) * np.sqrt((cc * cc).mean(axis=-1))
    with np.errstate(invalid="ignore", divide="ignore"):
        rho = np.where(valid, cov / np.where(valid, denom, 1.0), 0.0)
    return np.clip(rho, -1.0, 1.0)


def corr_summary(cmap: np.ndarray) -> tuple[float, tuple[float, float, float]]:
    """Mean coefficient and the fractions of negative, zero and positive entries.

    For ``w = 2`` maps these are exactly the fractions of -1, 0 and +1.
    """
    cmap = np.asarray(cmap, dtype=np.float64)
    n = cmap.size
    if n == 0:
        return 0.0, (0.0, 1.0, 0.0)
    neg = np.count_nonzero(cmap < 0) / n
    pos = np.count_nonzero(cmap > 0) / n
    return float(cmap.mean()), (neg, 1.0 - neg - pos, pos)
