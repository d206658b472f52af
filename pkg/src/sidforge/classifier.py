"""Compact detector head: artifact statistics + logistic model trained with AdamW."""
from __future__ import annotations

import functools
import logging
import math
import os
import struct
from dataclasses import dataclass, field

import numpy as np

from .corrmap import corr_summary, local_correlation_map
from .features import Extractor
from .imgcore import as_image, read_image, to_gray
from .parallel import parallel_map
from .transforms import AugmentConfig, RandStream, augment

__all__ = [
    "FEATURE_DIM",
    "featurize",
    "image_features",
    "TrainConfig",
    "LogisticModel",
    "AdamState",
    "logits",
    "scores",
    "bce_loss_and_grad",
    "adamw_step",
    "lr_schedule",
    "TrainResult",
    "train",
    "save_model",
    "load_model",
    "dumps_model",
    "loads_model",
]

log = logging.getLogger(__name__)

FEATURE_DIM = 28
LOGIT_CLAMP = 30.0
GRID = 4


def _grid_bounds(n: int) -> list[int]:
    step = n // GRID
    return [k * step for k in range(GRID)] + [n]


def featurize(fmap: np.ndarray, corr: np.ndarray) -> np.ndarray:
    """28-dim statistics vector of a feature map and a correlation map.

    Layout: per channel ``(mean |x|, std, excess kurtosis)`` for 3 channels,
    then the 4x4 grid of channel-averaged ``mean |x|`` in row-major order,
    then the negative/zero/positive fractions of ``corr``. Single-channel maps
    are replicated into the three per-channel slots. A channel with zero
    standard deviation gets kurtosis 0.
    """
    fmap = as_image(fmap)
    if fmap.shape[0] == 1:
        fmap = np.repeat(fmap, 3, axis=0)
    if fmap.shape[0] != 3:
        raise ValueError(f"featurize expects 1 or 3 channels, got {fmap.shape[0]}")
    out = np.empty(FEATURE_DIM, dtype=np.float64)
    flat = fmap.reshape(3, -1)
    absmap = np.abs(fmap)
    centered = flat - flat.mean(axis=1, keepdims=True)
    m2 = (centered ** 2).mean(axis=1)
    m4 = (centered ** 4).mean(axis=1)
    std = np.sqrt(m2)
    with np.errstate(invalid="ignore", divide="ignore"):
        kurt = np.where(m2 > 0, m4 / np.where(m2 > 0, m2 * m2, 1.0) - 3.0, 0.0)
    out[0:9:3] = absmap.reshape(3, -1).mean(axis=1)
    out[1:9:3] = std
    out[2:9:3] = kurt

    avg = absmap.mean(axis=0)
    rb = _grid_bounds(avg.shape[0])
    cb = _grid_bounds(avg.shape[1])
    k = 9
    for i in range(GRID):
        for j in range(GRID):
            cell = avg[rb[i]:rb[i + 1], cb[j]:cb[j + 1]]
            out[k] = cell.mean() if cell.size else 0.0
            k += 1

    _, hist = corr_summary(corr)
    out[25:28] = hist
    return out


def image_features(x: np.ndarray, extractor: Extractor) -> np.ndarray:
    """Features of an already cropped image: extractor map + w=2 correlation map of its luma."""
    x = as_image(x)
    return featurize(extractor(x), local_correlation_map(to_gray(x), 2))


@dataclass
class TrainConfig:
    lr: float = 5e-3
    weight_decay: float = 0.01
    batch_size: int = 32
    epochs: int = 20
    warmup_epochs: int = 1
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    seed: int = 42

    def __post_init__(self):
        if self.lr <= 0:
            raise ValueError(f"lr must be > 0, got {self.lr}")
        if self.weight_decay < 0:
            raise ValueError(f"weight_decay must be >= 0, got {self.weight_decay}")
        if self.batch_size < 1:
            raise ValueError(f"batch_size must be >= 1, got {self.batch_size}")
        if self.epochs < 0 or self.warmup_epochs < 0:
            raise ValueError("epochs and warmup_epochs must be >= 0")
        if self.epochs and self.epochs < self.warmup_epochs:
            raise ValueError("epochs must be >= warmup_epochs")
        for name in ("beta1", "beta2"):
            if not 0.0 <= getattr(self, name) < 1.0:
                raise ValueError(f"{name} must lie in [0, 1)")
        if self.eps <= 0:
            raise ValueError(f"eps must be > 0, got {self.eps}")


@dataclass
class LogisticModel:
    """Logistic head over standardised features: ``w . (f - mean) / scale + b``."""

    weights: np.ndarray = field(default_factory=lambda: np.zeros(FEATURE_DIM))
    bias: float = 0.0
    mean: np.ndarray = field(default_factory=lambda: np.zeros(FEATURE_DIM))
    scale: np.ndarray = field(default_factory=lambda: np.ones(FEATURE_DIM))

    def __post_init__(self):
        self.weights = np.asarray(self.weights, dtype=np.float64)
        self.mean = np.asarray(self.mean, dtype=np.float64)
        self.scale = np.asarray(self.scale, dtype=np.float64)
        self.bias = float(self.bias)

    def standardize(self, feats: np.ndarray) -> np.ndarray:
        return (np.asarray(feats, dtype=np.float64) - self.mean) / self.scale


def logits(model: LogisticModel, feats: np.ndarray) -> np.ndarray:
    return model.standardize(feats) @ model.weights + model.bias


def _sigmoid(z):
    return 0.5 * (1.0 + np.tanh(0.5 * np.asarray(z, dtype=np.float64)))


def scores(model: LogisticModel, feats: np.ndarray) -> np.ndarray:
    """Probability of the synthetic class; an image is flagged fake when >= 0.5."""
    return _sigmoid(logits(model, feats))


def bce_loss_and_grad(model: LogisticModel, feats: np.ndarray, labels: np.ndarray):
    """Mean binary cross-entropy on logits and its gradient.

    Logits are clamped to +-30; the gradient is zero where the clamp is active.

    Returns
    -------
    loss : float
    grad_w : ndarray
    grad_b : float
    """
    xs = model.standardize(np.atleast_2d(feats))
    y = np.asarray(labels, dtype=np.float64)
    raw = xs @ model.weights + model.bias
    z = np.clip(raw, -LOGIT_CLAMP, LOGIT_CLAMP)
    loss = float(np.mean(np.logaddexp(0.0, z) - y * z))
    g = (_sigmoid(z) - y) * (np.abs(raw) <= LOGIT_CLAMP)
    n = y.shape[0]
    return loss, xs.T @ g / n, float(g.sum() / n)


@dataclass
class AdamState:
    m_w: np.ndarray = field(default_factory=lambda: np.zeros(FEATURE_DIM))
    v_w: np.ndarray = field(default_factory=lambda: np.zeros(FEATURE_DIM))
    m_b: float = 0.0
    v_b: float = 0.0
    t: int = 0


def adamw_step(model: LogisticModel, grad_w: np.ndarray, grad_b: float, state: AdamState,
               lr: float, cfg: TrainConfig) -> tuple[LogisticModel, AdamState]:
    """One bias-corrected Adam update with decoupled weight decay.

    ``theta <- theta - lr * m_hat / (sqrt(v_hat) + eps) - lr * wd * theta``,
    applied to weights and bias alike.
    """
    b1, b2 = cfg.beta1, cfg.beta2
    t = state.t + 1
    m_w = b1 * state.m_w + (1 - b1) * grad_w
    v_w = b2 * state.v_w + (1 - b2) * grad_w * grad_w
    m_b = b1 * state.m_b + (1 - b1) * grad_b
    v_b = b2 * state.v_b + (1 - b2) * grad_b * grad_b
    c1 = 1 - b1 ** t
    c2 = 1 - b2 ** t
    step_w = (m_w / c1) / (np.sqrt(v_w / c2) + cfg.eps)
    step_b = (m_b / c1) / (math.sqrt(v_b / c2) + cfg.eps)
    wd = cfg.weight_decay
    new_model = LogisticModel(
        weights=model.weights - lr * step_w - lr * wd * model.weights,
        bias=model.bias - lr * step_b - lr * wd * model.bias,
        mean=model.mean,
        scale=model.scale,
    )
    return new_model, AdamState(m_w=m_w, v_w=v_w, m_b=m_b, v_b=v_b, t=t)


def lr_schedule(step: int, total_steps: int, warmup_steps: int, base_lr: float) -> float:
    """Linear warmup from 0 to ``base_lr``, then cosine annealing to 0 at ``total_steps``."""
    if step < warmup_steps:
        return base_lr * step / warmup_steps
    if total_steps <= warmup_steps:
        return base_lr
    progress = min(1.0, (step - warmup_steps) / (total_steps - warmup_steps))
    return base_lr * 0.5 * (1.0 + math.cos(math.pi * progress))


# -- training ---------------------------------------------------------------


@dataclass
class TrainResult:
    model: LogisticModel
    history: list[dict]


@functools.lru_cache(maxsize=4096)
def _cached_levels(path: str) -> np.ndarray:
    # 8-bit levels, so the cache costs 1/8 of the float image
    levels = np.round(read_image(path) * 255.0).astype(np.uint8)
    levels.setflags(write=False)
    return levels


def _train_sample_features(job) -> np.ndarray:
    path, seed, epoch, index, aug, extractor = job
    rng = RandStream.split(seed, epoch, index)
    x = augment(_cached_levels(path) / 255.0, aug, rng)
    return image_features(x, extractor)


def epoch_features(dataset, epoch: int, seed: int, aug: AugmentConfig,
                   extractor: Extractor, workers: int = 1) -> np.ndarray:
    """Augmented features for every sample, each drawn from its own stream."""
    jobs = [(s.path, seed, epoch, i, aug, extractor) for i, s in enumerate(dataset.samples)]
    return np.stack(parallel_map(_train_sample_features, jobs, workers))


def train(dataset, cfg: TrainConfig | None = None, aug: AugmentConfig | None = None,
          extractor: Extractor | None = None, workers: int = 1) -> TrainResult:
    """Train the logistic head on augmented random crops.

    Each epoch recomputes features with streams keyed on
    ``(seed, epoch, sample_index)`` and visits samples in a seeded shuffle.
    Standardisation statistics come from the first epoch and are frozen into
    the model.
    """
    cfg = cfg or TrainConfig()
    aug = aug or AugmentConfig()
    extractor = extractor or Extractor()
    y = np.array([s.label for s in dataset.samples], dtype=np.float64)
    if y.size == 0 or np.all(y == y[0]):
        raise ValueError("training needs samples from both classes")

    model = LogisticModel()
    history: list[dict] = []
    if cfg.epochs == 0:
        return TrainResult(model, history)

    n = y.size
    per_epoch = math.ceil(n / cfg.batch_size)
    total = cfg.epochs * per_epoch
    warmup = cfg.warmup_epochs * per_epoch
    state = AdamState()
    step = 0
    for epoch in range(cfg.epochs):
        feats = epoch_features(dataset, epoch, cfg.seed, aug, extractor, workers)
        if epoch == 0:
            scale = feats.std(axis=0)
            scale[scale == 0] = 1.0
            model = LogisticModel(mean=feats.mean(axis=0), scale=scale)
        order = RandStream.split(cfg.seed, epoch).permutation(n)
        loss_sum = 0.0
        for start in range(0, n, cfg.batch_size):
            idx = order[start:start + cfg.batch_size]
            loss, gw, gb = bce_loss_and_grad(model, feats[idx], y[idx])
            lr = lr_schedule(step, total, warmup, cfg.lr)
            model, state = adamw_step(model, gw, gb, state, lr, cfg)
            loss_sum += loss * idx.size
            step += 1
        acc = float(np.mean((scores(model, feats) >= 0.5) == (y == 1)))
        history.append({"epoch": epoch + 1, "loss": loss_sum / n, "acc": acc})
        log.info("epoch %d loss %.5f acc %.4f", epoch + 1, loss_sum / n, acc)
    return TrainResult(model, history)


# -- SIDM model file --------------------------------------------------------

SIDM_MAGIC = b"SIDM"
SIDM_VERSION = 1
_SIDM_HEADER = struct.Struct("<4sII")


def dumps_model(model: LogisticModel) -> bytes:
    """Magic, u32 version, u32 dim, then w, b, mean, scale as LE float64."""
    body = np.concatenate([model.weights, [model.bias], model.mean, model.scale])
    return _SIDM_HEADER.pack(SIDM_MAGIC, SIDM_VERSION, FEATURE_DIM) + body.astype("<f8").tobytes()


def loads_model(data: bytes) -> LogisticModel:
    if len(data) < _SIDM_HEADER.size:
        raise ValueError("SIDM stream shorter than header")
    magic, version, dim = _SIDM_HEADER.unpack_from(data)
    if magic != SIDM_MAGIC:
        raise ValueError(f"bad SIDM magic {magic!r}")
    if version != SIDM_VERSION:
        raise ValueError(f"unsupported SIDM version {version}")
    if dim != FEATURE_DIM:
        raise ValueError(f"model dimension {dim} != {FEATURE_DIM}")
    expected = _SIDM_HEADER.size + 8 * (3 * dim + 1)
    if len(data) != expected:
        raise ValueError(f"SIDM payload size {len(data)} != expected {expected}")
    v = np.frombuffer(data, dtype="<f8", offset=_SIDM_HEADER.size).astype(np.float64)
    return LogisticModel(weights=v[:dim], bias=v[dim], mean=v[dim + 1:2 * dim + 1], scale=v[2 * dim + 1:])


def save_model(path: str | os.PathLike, model: LogisticModel) -> None:
    with open(path, "wb") as fh:
        fh.write(dumps_model(model))


def load_model(path: str | os.PathLike) -> LogisticModel:
    with open(path, "rb") as fh:
        return loads_model(fh.read())
