"""Dataset ingestion, toy fake synthesis and evaluation loops.

Datasets follow the benchmark layout ``root/<source>/{0_real,1_fake}/*.png``.
"""
from __future__ import annotations

import csv
import hashlib
import io
import json
import logging
import os
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np
from scipy import ndimage

from .classifier import LogisticModel, image_features, scores
from .features import Extractor
from .imgcore import ImageDecodeError, as_image, bilinear_resize, read_image, write_png
from .metrics import accuracy, average_precision
from .parallel import parallel_map
from .perturb import PerturbSpec, apply_perturbation, gaussian_blur
from .transforms import RandStream, center_crop

__all__ = [
    "LabeledSample",
    "Dataset",
    "load_dataset",
    "SMOOTH_KERNEL",
    "synthesize_fake",
    "toy_natural_image",
    "make_toy_corpus",
    "SourceMetrics",
    "EvalReport",
    "evaluate",
]

log = logging.getLogger(__name__)

CLASS_DIRS = {"0_real": 0, "1_fake": 1}
IMAGE_SUFFIXES = {".png", ".jpg", ".jpeg"}


@dataclass(frozen=True)
class LabeledSample:
    path: str
    label: int
    source_id: str


@dataclass
class Dataset:
    root: str
    samples: list[LabeledSample]
    ignored: int = 0

    def __len__(self) -> int:
        return len(self.samples)

    @property
    def labels(self) -> np.ndarray:
        return np.array([s.label for s in self.samples], dtype=np.int64)

    @property
    def sources(self) -> list[str]:
        return sorted({s.source_id for s in self.samples})


def _images_in(folder: Path) -> list[Path]:
    return sorted(p for p in folder.iterdir() if p.is_file() and p.suffix.lower() in IMAGE_SUFFIXES)


def load_dataset(root: str | os.PathLike) -> Dataset:
    """Enumerate ``root/<source>/{0_real,1_fake}`` sorted by path.

    A root that directly holds the two class folders is read as a single
    source named after the root. Directories without class folders are
    skipped and counted in ``Dataset.ignored``.

    Raises
    ------
    ValueError
        If a source lacks a class folder or one of them holds no images.
    """
    root = Path(root)
    if not root.is_dir():
        raise FileNotFoundError(f"dataset root {root} does not exist")
    if any((root / c).is_dir() for c in CLASS_DIRS):
        candidates = [root]
    else:
        candidates = sorted(p for p in root.iterdir() if p.is_dir())

    samples: list[LabeledSample] = []
    ignored = 0
    for src in candidates:
        present = {c for c in CLASS_DIRS if (src / c).is_dir()}
        if not present:
            ignored += 1
            continue
        missing = [c for c in CLASS_DIRS if c not in present or not _images_in(src / c)]
        if missing:
            raise ValueError(f"source '{src.name}' has no images in {', '.join(missing)}")
        for sub in src.iterdir():
            if sub.is_dir() and sub.name not in CLASS_DIRS:
                ignored += 1
        for cname, label in CLASS_DIRS.items():
            for p in _images_in(src / cname):
                samples.append(LabeledSample(str(p), label, src.name))
    if not samples:
        raise ValueError(f"no sources with 0_real/ and 1_fake/ under {root}")
    if ignored:
        log.warning("ignored %d unrecognised folders under %s", ignored, root)
    samples.sort(key=lambda s: s.path)
    return Dataset(str(root), samples, ignored)


# -- toy generator ----------------------------------------------------------

SMOOTH_KERNEL = np.full((3, 3), 0.5 / 8)
SMOOTH_KERNEL[1, 1] = 0.5


def synthesize_fake(x: np.ndarray) -> np.ndarray:
    """Desk-scale stand-in for a generator's up-sampling + convolution path.

    Bilinear down to half size, bilinear back up, then a 3x3 smoothing kernel
    (centre 0.5, the rest spread evenly over the 8 neighbours).
    """
    x = as_image(x)
    _, h, w = x.shape
    if h % 2 or w % 2:
        raise ValueError(f"synthesize_fake needs even dimensions, got {h}x{w}")
    y = bilinear_resize(bilinear_resize(x, h // 2, w // 2), h, w)
    y = np.stack([ndimage.convolve(ch, SMOOTH_KERNEL, mode="mirror") for ch in y])
    return np.clip(y, 0.0, 1.0)


def toy_natural_image(rng: RandStream, size: int = 256, channels: int = 3) -> np.ndarray:
    """Dead-leaves scene with optical blur, sensor noise and 8-bit quantisation.

    Occluding disks with power-law radii reproduce the scale-invariant
    statistics of photographs; per-image noise level is drawn from
    ``U[0.01, 0.03]``.
    """
    g = rng.generator
    img = np.empty((channels, size, size))
    img[:] = g.random((channels, 1, 1))
    yy, xx = np.mgrid[0:size, 0:size]
    rmin, rmax = 2.0, size / 3.0
    n_disks = int(g.integers(150, 400))
    # inverse-CDF sampling of p(r) ~ r^-3 on [rmin, rmax]
    u = g.random(n_disks)
    radii = 1.0 / np.sqrt(1.0 / rmin ** 2 - u * (1.0 / rmin ** 2 - 1.0 / rmax ** 2))
    centres = g.random((n_disks, 2)) * size
    base = g.random((n_disks, channels))
    shade = g.normal(0.0, 0.15, (n_disks, 2)) / size
    for (cy, cx), r, col, (sy, sx) in zip(centres, radii, base, shade):
        y0, y1 = max(0, int(cy - r)), min(size, int(cy + r) + 1)
        x0, x1 = max(0, int(cx - r)), min(size, int(cx + r) + 1)
        if y0 >= y1 or x0 >= x1:
            continue
        dy = yy[y0:y1, x0:x1] - cy
        dx = xx[y0:y1, x0:x1] - cx
        inside = dy * dy + dx * dx <= r * r
        # gentle linear shading so surfaces are not perfectly flat
        val = col[:, None, None] + sy * dy + sx * dx
        img[:, y0:y1, x0:x1] = np.where(inside, val, img[:, y0:y1, x0:x1])
    img = gaussian_blur(np.clip(img, 0.0, 1.0), g.uniform(0.4, 0.8))
    img = img + g.normal(0.0, g.uniform(0.01, 0.03), img.shape)
    return np.round(np.clip(img, 0.0, 1.0) * 255.0) / 255.0


def make_toy_corpus(root: str | os.PathLike, n_pairs: int, seed: int = 0, size: int = 256,
                    source_id: str = "toy", channels: int = 3) -> Path:
    """Write ``n_pairs`` natural/fake pairs under ``root/source_id/{0_real,1_fake}``."""
    base = Path(root) / source_id
    (base / "0_real").mkdir(parents=True, exist_ok=True)
    (base / "1_fake").mkdir(parents=True, exist_ok=True)
    for i in range(n_pairs):
        real = toy_natural_image(RandStream.split(seed, i), size, channels)
        write_png(base / "0_real" / f"{i:05d}.png", real)
        write_png(base / "1_fake" / f"{i:05d}.png", synthesize_fake(real))
    return Path(root)


# -- evaluation -------------------------------------------------------------


@dataclass
class SourceMetrics:
    source_id: str
    n: int
    acc: float
    ap: float


@dataclass
class EvalReport:
    sources: list[SourceMetrics]
    acc_m: float
    ap_m: float
    total: int
    errors: int = 0
    skipped: list[str] = field(default_factory=list)

    def to_csv(self) -> str:
        buf = io.StringIO()
        wr = csv.writer(buf, lineterminator="\n")
        wr.writerow(["source_id", "n", "acc", "ap"])
        for s in self.sources:
            wr.writerow([s.source_id, s.n, f"{s.acc:.6f}", f"{s.ap:.6f}"])
        wr.writerow(["MACRO", self.total, f"{self.acc_m:.6f}", f"{self.ap_m:.6f}"])
        return buf.getvalue()

    def to_json(self) -> str:
        return json.dumps(
            {
                "sources": [asdict(s) for s in self.sources],
                "macro": {"n": self.total, "acc_m": self.acc_m, "ap_m": self.ap_m},
                "errors": self.errors,
                "skipped": self.skipped,
            },
            indent=2,
            sort_keys=True,
        )


def sample_key(sample: LabeledSample) -> int:
    """Stable 63-bit key for a sample, independent of enumeration order."""
    ident = f"{sample.source_id}/{sample.label}/{os.path.basename(sample.path)}"
    return int.from_bytes(hashlib.blake2b(ident.encode(), digest_size=8).digest(), "little") >> 1


def _eval_sample(job):
    sample, extractor, perturb, crop, seed = job
    try:
        x = read_image(sample.path)
    except (ImageDecodeError, OSError) as exc:
        return None, f"{sample.path}: {exc}"
    rng = RandStream.split(seed, sample_key(sample))
    x = apply_perturbation(x, perturb, rng)
    x = center_crop(x, crop)
    return image_features(x, extractor), None


def evaluate(model: LogisticModel, dataset: Dataset, extractor: Extractor | None = None,
             perturb: PerturbSpec | None = None, crop: int = 256, seed: int = 42,
             workers: int = 1, skip_bad: bool = False) -> EvalReport:
    """Score every sample (perturb, centre crop, extract, featurise) and aggregate.

    Per-source metrics are computed over samples sorted by path and macro
    means are unweighted over sources, so neither the enumeration order nor
    the worker count affects the report.
    """
    extractor = extractor or Extractor()
    samples = sorted(dataset.samples, key=lambda s: s.path)
    jobs = [(s, extractor, perturb, crop, seed) for s in samples]
    results = parallel_map(_eval_sample, jobs, workers)

    errors = [err for _, err in results if err is not None]
    if errors and not skip_bad:
        raise ImageDecodeError("evaluate", f"{len(errors)} unreadable samples; first: {errors[0]}")
    kept = [(s, f) for s, (f, err) in zip(samples, results) if err is None]
    if not kept:
        raise ValueError("no readable samples to evaluate")

    feats = np.stack([f for _, f in kept])
    sc = scores(model, feats)
    per_source = []
    for src in sorted({s.source_id for s, _ in kept}):
        idx = [i for i, (s, _) in enumerate(kept) if s.source_id == src]
        y = np.array([kept[i][0].label for i in idx])
        ap = average_precision(sc[idx], y) if y.any() else float("nan")
        per_source.append(SourceMetrics(src, len(idx), accuracy(sc[idx], y), ap))
    return EvalReport(
        sources=per_source,
        acc_m=float(np.mean([m.acc for m in per_source])),
        ap_m=float(np.mean([m.ap for m in per_source])),
        total=len(kept),
        errors=len(errors),
        skipped=errors,
    )


def predict_scores(model: LogisticModel, dataset: Dataset, extractor: Extractor | None = None,
                   crop: int = 256) -> np.ndarray:
    """Scores in dataset order without perturbation; used for quick inspection."""
    extractor = extractor or Extractor()
    feats = np.stack([image_features(center_crop(read_image(s.path), crop), extractor)
                      for s in dataset.samples])
    return scores(model, feats)
