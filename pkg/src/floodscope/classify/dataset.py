"""Labeled samples: construction, CSV exchange and stratified splitting."""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from floodscope.errors import EmptyDataset, LabelOutOfRange, ParseError


@dataclass(frozen=True, eq=False)
class LabeledDataset:
    features: np.ndarray
    labels: np.ndarray
    class_names: tuple
    feature_names: tuple

    def __post_init__(self):
        X = np.array(self.features, dtype=np.float32, copy=True)
        y = np.array(self.labels, dtype=np.int64, copy=True)
        if X.ndim != 2:
            raise ValueError(f"features must be an n x d matrix, got shape {X.shape}")
        if X.shape[0] == 0:
            raise EmptyDataset("dataset has no samples")
        if X.shape[1] == 0:
            raise ValueError("dataset has no features")
        if y.shape != (X.shape[0],):
            raise ValueError(f"expected {X.shape[0]} labels, got shape {y.shape}")
        if np.isnan(X).any():
            raise ValueError("features contain NaN; drop invalid pixels before building a dataset")
        names = tuple(str(c) for c in self.class_names)
        if y.min() < 0 or y.max() >= len(names):
            raise LabelOutOfRange(f"labels must lie in [0, {len(names)})")
        fnames = tuple(str(f) for f in self.feature_names) or tuple(
            f"f{j}" for j in range(X.shape[1])
        )
        if len(fnames) != X.shape[1]:
            raise ValueError(f"{len(fnames)} feature names for {X.shape[1]} features")
        X.setflags(write=False)
        y.setflags(write=False)
        object.__setattr__(self, "features", X)
        object.__setattr__(self, "labels", y)
        object.__setattr__(self, "class_names", names)
        object.__setattr__(self, "feature_names", fnames)

    @property
    def n_samples(self) -> int:
        return self.features.shape[0]

    @property
    def n_features(self) -> int:
        return self.features.shape[1]

    @property
    def n_classes(self) -> int:
        return len(self.class_names)

    def class_counts(self) -> np.ndarray:
        return np.bincount(self.labels, minlength=self.n_classes)

    def subset(self, index) -> "LabeledDataset":
        return LabeledDataset(
            self.features[index], self.labels[index], self.class_names, self.feature_names
        )


def stratified_split(
    ds: LabeledDataset, validation_fraction: float = 0.2, seed: int = 0
) -> tuple[LabeledDataset, LabeledDataset]:
    """
    Seeded per-class shuffle; round(fraction * n_c) samples of each class go to
    validation. Classes too small to give up a sample stay entirely in training.
    """
    if not 0.0 < validation_fraction < 1.0:
        raise ValueError("validation_fraction must lie in (0, 1)")
    rng = np.random.default_rng(seed)
    train_idx, val_idx = [], []
    for c in range(ds.n_classes):
        members = np.flatnonzero(ds.labels == c)
        members = members[rng.permutation(len(members))]
        n_val = int(round(validation_fraction * len(members)))
        n_val = min(n_val, len(members) - 1) if len(members) > 1 else 0
        val_idx.append(members[:n_val])
        train_idx.append(members[n_val:])
    train = np.sort(np.concatenate(train_idx))
    val = np.sort(np.concatenate(val_idx))
    if len(val) == 0:
        raise EmptyDataset("validation split is empty; need more samples")
    return ds.subset(train), ds.subset(val)


def parse_samples_csv(text: str, source: str | None = None, class_names: Sequence[str] | None = None) -> LabeledDataset:
    """
    Read ``label,feat1,...,featd`` rows (header required).

    Integer labels are used as class indices. Text labels are mapped through
    ``class_names`` when given, otherwise through their sorted unique values.
    """
    reader = csv.reader(io.StringIO(text))
    try:
        header = next(reader)
    except StopIteration:
        raise EmptyDataset(f"{source or 'samples'}: file is empty") from None
    if len(header) < 2:
        raise ParseError("header needs a label column and at least one feature", 1, source)
    raw_labels, rows = [], []
    for lineno, row in enumerate(reader, start=2):
        if not row or all(not cell.strip() for cell in row):
            continue
        if len(row) != len(header):
            raise ParseError(f"expected {len(header)} fields, got {len(row)}", lineno, source)
        try:
            rows.append([float(v) for v in row[1:]])
        except ValueError as exc:
            raise ParseError(f"non-numeric feature: {exc}", lineno, source) from None
        raw_labels.append(row[0].strip())
    if not rows:
        raise EmptyDataset(f"{source or 'samples'}: no sample rows")

    if class_names is None and all(lab.lstrip("-").isdigit() for lab in raw_labels):
        labels = [int(lab) for lab in raw_labels]
        if min(labels) < 0:
            raise LabelOutOfRange("integer labels must be non-negative")
        names = tuple(f"class_{c}" for c in range(max(labels) + 1))
    else:
        names = tuple(class_names) if class_names is not None else tuple(sorted(set(raw_labels)))
        lookup = {name: k for k, name in enumerate(names)}
        try:
            labels = [lookup[lab] for lab in raw_labels]
        except KeyError as exc:
            raise LabelOutOfRange(f"label {exc.args[0]!r} not among classes {list(names)}") from None
    return LabeledDataset(np.array(rows), np.array(labels), names, tuple(header[1:]))


def read_samples_csv(path, class_names=None) -> LabeledDataset:
    path = Path(path)
    return parse_samples_csv(path.read_text(), str(path), class_names)


def format_samples_csv(ds: LabeledDataset) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["label", *ds.feature_names])
    for label, row in zip(ds.labels, ds.features):
        # 9 significant digits round-trips float32 exactly
        writer.writerow([ds.class_names[label], *(format(float(v), ".9g") for v in row)])
    return buf.getvalue()
