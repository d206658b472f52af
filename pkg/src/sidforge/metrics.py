"""Threshold accuracy and average precision."""
from __future__ import annotations

import numpy as np

__all__ = ["accuracy", "average_precision"]


def accuracy(scores, labels, threshold: float = 0.5) -> float:
    """Fraction of samples where ``score >= threshold`` agrees with the label."""
    s = np.asarray(scores, dtype=np.float64)
    y = np.asarray(labels)
    if s.size == 0:
        raise ValueError("accuracy of an empty set is undefined")
    if s.shape != y.shape:
        raise ValueError(f"scores {s.shape} and labels {y.shape} differ in shape")
    return float(np.mean((s >= threshold) == (y == 1)))


def average_precision(scores, labels) -> float:
    """Mean of precision@k over the ranks k that hold a positive.

    Samples are ranked by descending score; equal scores keep their input
    order.
    """
    s = np.asarray(scores, dtype=np.float64)
    y = np.asarray(labels) == 1
    if s.shape != y.shape:
        raise ValueError(f"scores {s.shape} and labels {y.shape} differ in shape")
    npos = int(y.sum())
    if npos == 0:
        raise ValueError("average precision needs at least one positive")
    order = np.lexsort((np.arange(s.size), -s))
    hits = y[order]
    precision = np.cumsum(hits) / np.arange(1, s.size + 1)
    return float(precision[hits].sum() / npos)
