"""Confusion matrices and the accuracy / precision / recall / F1 bundle."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from ..labels import NUM_CLASSES, SENTIMENTS

AVERAGING_MODES = ("macro", "weighted")


@dataclass(frozen=True)
class ConfusionMatrix:
    """3x3 count matrix; rows are gold labels, columns predictions, both in
    the fixed class order (positive, negative, neutral)."""

    counts: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.counts, dtype=np.int64)
        if arr.shape != (NUM_CLASSES, NUM_CLASSES):
            raise ValueError(f"expected a {NUM_CLASSES}x{NUM_CLASSES} matrix, "
                             f"got shape {arr.shape}")
        if (arr < 0).any():
            raise ValueError("confusion counts must be non-negative")
        object.__setattr__(self, "counts", arr)

    @property
    def total(self) -> int:
        return int(self.counts.sum())

    def __eq__(self, other) -> bool:
        return isinstance(other, ConfusionMatrix) and bool(
            np.array_equal(self.counts, other.counts))


@dataclass(frozen=True)
class MetricSet:
    accuracy: float
    precision: float
    recall: float
    f1: float
    averaging: str

    def as_dict(self) -> dict[str, float]:
        return {
            "accuracy": self.accuracy,
            "precision": self.precision,
            "recall": self.recall,
            "f1": self.f1,
        }


def confusion(preds: Sequence[int], golds: Sequence[int]) -> ConfusionMatrix:
    if len(preds) != len(golds):
        raise ValueError(f"prediction and gold lists must align: "
                         f"{len(preds)} vs {len(golds)}")
    counts = np.zeros((NUM_CLASSES, NUM_CLASSES), dtype=np.int64)
    for pred, gold in zip(preds, golds):
        pred, gold = int(pred), int(gold)
        if not 0 <= gold < NUM_CLASSES:
            raise ValueError(f"gold label index {gold} outside the "
                             f"{NUM_CLASSES}-class vocabulary {SENTIMENTS}")
        if not 0 <= pred < NUM_CLASSES:
            raise ValueError(f"predicted label index {pred} outside the "
                             f"{NUM_CLASSES}-class vocabulary {SENTIMENTS}")
        counts[gold, pred] += 1
    return ConfusionMatrix(counts=counts)


def _safe_div(num: float, den: float) -> float:
    # The 0/0 convention: a class with no predictions (or no support)
    # contributes 0, not NaN.
    return num / den if den != 0 else 0.0


def metrics(cm: ConfusionMatrix, averaging: str = "macro") -> MetricSet:
    if averaging not in AVERAGING_MODES:
        raise ValueError(f"averaging must be one of {AVERAGING_MODES}, "
                         f"got {averaging!r}")
    total = cm.total
    if total == 0:
        raise ValueError("cannot compute metrics over an empty confusion matrix")
    counts = cm.counts
    per_precision = []
    per_recall = []
    per_f1 = []
    support = counts.sum(axis=1)
    for c in range(NUM_CLASSES):
        tp = float(counts[c, c])
        p = _safe_div(tp, float(counts[:, c].sum()))
        r = _safe_div(tp, float(counts[c, :].sum()))
        f = _safe_div(2 * p * r, p + r)
        per_precision.append(p)
        per_recall.append(r)
        per_f1.append(f)
    if averaging == "macro":
        weights = np.full(NUM_CLASSES, 1.0 / NUM_CLASSES)
    else:
        weights = support / total
    return MetricSet(
        accuracy=float(np.trace(counts)) / total,
        precision=float(np.dot(weights, per_precision)),
        recall=float(np.dot(weights, per_recall)),
        f1=float(np.dot(weights, per_f1)),
        averaging=averaging,
    )
