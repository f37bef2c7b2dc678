"""Confusion matrices and the accuracy / precision / recall / F1 summary."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from floodscope.errors import EmptyMatrix, LabelOutOfRange, LengthMismatch


@dataclass(frozen=True, eq=False)
class ConfusionMatrix:
    """Rows are true classes, columns predicted classes."""

    counts: np.ndarray
    class_names: tuple = ()

    def __post_init__(self):
        counts = np.array(self.counts, dtype=np.int64, copy=True)
        if counts.ndim != 2 or counts.shape[0] != counts.shape[1]:
            raise ValueError(f"confusion matrix must be square, got shape {counts.shape}")
        if (counts < 0).any():
            raise ValueError("confusion counts must be non-negative")
        counts.setflags(write=False)
        object.__setattr__(self, "counts", counts)
        names = tuple(self.class_names) or tuple(f"class_{c}" for c in range(counts.shape[0]))
        object.__setattr__(self, "class_names", names)

    @property
    def total(self) -> int:
        return int(self.counts.sum())

    def __eq__(self, other):
        return isinstance(other, ConfusionMatrix) and np.array_equal(self.counts, other.counts)


def confusion_matrix(truth, predicted, n_classes: int, class_names: Sequence[str] = ()) -> ConfusionMatrix:
    truth = np.asarray(truth, dtype=np.int64).ravel()
    predicted = np.asarray(predicted, dtype=np.int64).ravel()
    if truth.shape != predicted.shape:
        raise LengthMismatch(f"{len(truth)} true labels vs {len(predicted)} predictions")
    if len(truth) == 0:
        raise LengthMismatch("no labels to compare")
    for name, labels in (("true", truth), ("predicted", predicted)):
        if labels.min() < 0 or labels.max() >= n_classes:
            raise LabelOutOfRange(f"{name} labels must lie in [0, {n_classes})")
    counts = np.bincount(truth * n_classes + predicted, minlength=n_classes * n_classes)
    return ConfusionMatrix(counts.reshape(n_classes, n_classes), tuple(class_names))


@dataclass(frozen=True)
class ClassificationScores:
    accuracy: float
    precision: float
    recall: float
    f1: float


def classification_metrics(cm: ConfusionMatrix, average: str = "macro") -> ClassificationScores:
    """
    Accuracy plus averaged precision, recall and F1.

    Per class: precision = TP / predicted, recall = TP / actual,
    F1 = 2PR / (P + R); a zero denominator scores 0. ``average="macro"`` takes
    the unweighted mean over classes, ``"weighted"`` weights by class support.
    """
    counts = cm.counts.astype(np.float64)
    total = counts.sum()
    if total == 0:
        raise EmptyMatrix("confusion matrix has no samples")
    tp = np.diag(counts)
    predicted = counts.sum(axis=0)
    actual = counts.sum(axis=1)
    with np.errstate(divide="ignore", invalid="ignore"):
        precision = np.where(predicted > 0, tp / predicted, 0.0)
        recall = np.where(actual > 0, tp / actual, 0.0)
        pr = precision + recall
        f1 = np.where(pr > 0, 2.0 * precision * recall / pr, 0.0)
    if average == "macro":
        weights = np.full(len(tp), 1.0 / len(tp))
    elif average == "weighted":
        weights = actual / total
    else:
        raise ValueError(f"average must be 'macro' or 'weighted', got {average!r}")
    return ClassificationScores(
        accuracy=float(tp.sum() / total),
        precision=float(weights @ precision),
        recall=float(weights @ recall),
        f1=float(weights @ f1),
    )


@dataclass(frozen=True)
class MetricsReport:
    """One row of the classifier comparison table."""

    model_name: str
    training_accuracy: float
    validation_accuracy: float
    macro_recall: float
    macro_f1: float
    macro_precision: float

    def __post_init__(self):
        for name in ("training_accuracy", "validation_accuracy", "macro_recall", "macro_f1", "macro_precision"):
            value = getattr(self, name)
            if not 0.0 <= value <= 1.0:
                raise ValueError(f"{name} must lie in [0, 1], got {value}")
