"""Built-in oracle checks behind ``sidforge selftest``.

Each check compares a fast routine against a direct, loop-based reference
on small random inputs. The checks are cheap (a few seconds in total) and
need nothing beyond the runtime dependencies.
"""
from __future__ import annotations

import math
from typing import Callable, TextIO

import numpy as np

from .classifier import FEATURE_DIM, AdamState, LogisticModel, TrainConfig, adamw_step, bce_loss_and_grad
from .corrmap import local_correlation_map
from .features import dct_highpass, dwt2_single, fft_highpass
from .metrics import average_precision
from .transforms import AugmentConfig, RandStream, adjust_jitter, mask_patches, rotate


def _corrmap() -> str:
    rng = np.random.default_rng(1)
    worst = 0.0
    for w in (2, 3, 4):
        for _ in range(20):
            img = rng.random((rng.integers(w, 9), rng.integers(w, 9)))
            got = local_correlation_map(img, w)
            h, wd = img.shape
            for i in range(h - w + 1):
                for j in range(wd - w + 1):
                    win = img[i:i + w, j:j + w]
                    r, c = win.mean(axis=0), win.mean(axis=1)
                    rc, cc = r - r.mean(), c - c.mean()
                    den = math.sqrt((rc @ rc) * (cc @ cc))
                    ref = 0.0 if den == 0 else float(rc @ cc) / den
                    worst = max(worst, abs(got[i, j] - ref))
    assert worst <= 1e-9, worst
    return f"max error {worst:.1e}"


def _dwt_constant() -> str:
    b = dwt2_single(np.full((3, 16, 16), 0.3))
    assert np.abs(b.ll - 0.6).max() <= 1e-12
    detail = max(np.abs(x).max() for x in (b.lh, b.hl, b.hh))
    assert detail <= 1e-5, detail
    return f"detail {detail:.1e}"


def _fft() -> str:
    rng = np.random.default_rng(2)
    x = rng.random((6, 8))
    h, w = x.shape
    fh = np.exp(-2j * np.pi * np.outer(np.arange(h), np.arange(h)) / h)
    fw = np.exp(-2j * np.pi * np.outer(np.arange(w), np.arange(w)) / w)
    spec = fh @ x @ fw.T
    u = np.arange(h)[:, None]
    v = np.arange(w)[None, :]
    su = np.where(u < h - h // 2, u, u - h)
    sv = np.where(v < w - w // 2, v, v - w)
    spec[(np.abs(su) < h / 4) & (np.abs(sv) < w / 4)] = 0
    ref = (np.conj(fh) @ spec @ np.conj(fw).T).real / (h * w)
    err = np.abs(fft_highpass(x)[0] - ref).max()
    assert err <= 1e-6, err
    return f"max error {err:.1e}"


def _dct() -> str:
    rng = np.random.default_rng(3)
    x = rng.random((5, 7))

    def basis(n):
        k = np.arange(n)[:, None]
        m = np.arange(n)[None, :]
        b = np.cos(np.pi * (2 * m + 1) * k / (2 * n)) * math.sqrt(2.0 / n)
        b[0] /= math.sqrt(2.0)
        return b

    bh, bw = basis(5), basis(7)
    coef = bh @ x @ bw.T
    i, j = np.indices(coef.shape)
    coef[i + j < 3] = 0
    err = np.abs(dct_highpass(x, 3)[0] - bh.T @ coef @ bw).max()
    assert err <= 1e-6, err
    return f"max error {err:.1e}"


def _rotation() -> str:
    x = np.random.default_rng(4).random((3, 5, 7))
    assert np.array_equal(rotate(x, 0.0), x)
    assert np.abs(rotate(x, 180.0) - x[:, ::-1, ::-1]).max() <= 1e-6
    sq = x[:, :5, :5]
    assert np.abs(rotate(sq, 90.0) - np.rot90(sq, 1, axes=(1, 2))).max() <= 1e-6
    return "0/90/180 degrees"


def _jitter_identity() -> str:
    x = np.random.default_rng(5).random((3, 6, 6))
    assert np.array_equal(adjust_jitter(x, 1.0, 1.0, 1.0), x)
    return "alpha 0 is identity"


def _mask() -> str:
    rng = RandStream(6)
    h = w = 64
    d = 8
    for r in (0.0, 0.1, 0.37, 0.75):
        _, mask, n = mask_patches(np.ones((1, h, w)), r, d, rng)
        assert n == math.floor(h * w * r / (d * d))
        assert int(mask.sum()) == n * d * d
        assert abs(mask.mean() - r) <= d * d / (h * w) + 1e-12
    return "patch counts exact"


def _ap() -> str:
    rng = np.random.default_rng(7)
    for _ in range(50):
        n = int(rng.integers(1, 21))
        s = rng.permutation(n) / n
        y = rng.integers(0, 2, n)
        if not y.any():
            y[0] = 1
        area, prev = 0.0, 0.0
        for t in sorted(set(s.tolist()), reverse=True):
            tp = int(((s >= t) & (y == 1)).sum())
            fp = int(((s >= t) & (y == 0)).sum())
            rec = tp / y.sum()
            area += (rec - prev) * tp / (tp + fp)
            prev = rec
        assert abs(average_precision(s, y) - area) <= 1e-12
    return "50 instances"


def _gradient() -> str:
    rng = np.random.default_rng(8)
    worst = 0.0
    for _ in range(20):
        m = LogisticModel(weights=rng.normal(size=FEATURE_DIM), bias=float(rng.normal()))
        f = rng.normal(size=(6, FEATURE_DIM)) * 0.3
        y = rng.integers(0, 2, 6)
        _, gw, gb = bce_loss_and_grad(m, f, y)
        h = 1e-6
        for k in range(FEATURE_DIM):
            wp, wm = m.weights.copy(), m.weights.copy()
            wp[k] += h
            wm[k] -= h
            num = (bce_loss_and_grad(LogisticModel(wp, m.bias), f, y)[0]
                   - bce_loss_and_grad(LogisticModel(wm, m.bias), f, y)[0]) / (2 * h)
            worst = max(worst, abs(num - gw[k]) / max(abs(num), abs(gw[k]), 1e-3))
    assert worst <= 1e-4, worst
    return f"max relative error {worst:.1e}"


def _adamw() -> str:
    g = np.random.default_rng(9).normal(size=FEATURE_DIM)
    model, _ = adamw_step(LogisticModel(), g, 1.0, AdamState(), 0.01, TrainConfig(weight_decay=0.0))
    assert np.allclose(model.weights, -0.01 * np.sign(g), rtol=1e-5)
    w = np.ones(FEATURE_DIM)
    shrunk, _ = adamw_step(LogisticModel(weights=w), np.zeros(FEATURE_DIM), 0.0, AdamState(), 0.1,
                           TrainConfig(weight_decay=0.01))
    assert np.abs(shrunk.weights - (1 - 0.1 * 0.01)).max() <= 1e-12
    return "first step and pure decay"


def _defaults() -> str:
    a, t = AugmentConfig(), TrainConfig()
    assert (a.alpha, a.beta, a.patch_size, a.max_mask_ratio, a.crop_size) == (0.5, 180.0, 16, 0.75, 256)
    assert (t.lr, t.weight_decay, t.batch_size, t.epochs, t.warmup_epochs) == (5e-3, 0.01, 32, 20, 1)
    return "training recipe"


CHECKS: list[tuple[str, Callable[[], str]]] = [
    ("corrmap-oracle", _corrmap),
    ("dwt-constant", _dwt_constant),
    ("fft-oracle", _fft),
    ("dct-oracle", _dct),
    ("rotation-permutation", _rotation),
    ("jitter-identity", _jitter_identity),
    ("mask-count", _mask),
    ("ap-oracle", _ap),
    ("bce-gradient", _gradient),
    ("adamw-closed-form", _adamw),
    ("defaults", _defaults),
]


def run_all(stream: TextIO | None = None) -> list[tuple[str, bool, str]]:
    """Run every check; returns ``(name, passed, detail)`` and prints one line each."""
    results = []
    for name, fn in CHECKS:
        try:
            detail, ok = fn(), True
        except AssertionError as exc:
            detail, ok = f"failed ({exc})", False
        results.append((name, ok, detail))
        if stream is not None:
            print(f"{'PASS' if ok else 'FAIL'} {name}: {detail}", file=stream)
    return results
