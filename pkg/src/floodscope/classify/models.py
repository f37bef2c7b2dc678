"""Linear SVM (Pegasos, one-vs-rest), Gaussian naive Bayes and minimum-distance classifiers."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from floodscope.classify.dataset import LabeledDataset
from floodscope.errors import ClassAbsent, EmptyDataset


def _frozen_array(obj, name, dtype=np.float64):
    arr = np.array(getattr(obj, name), dtype=dtype, copy=True)
    arr.setflags(write=False)
    object.__setattr__(obj, name, arr)


@dataclass(frozen=True, eq=False)
class LinearSvmModel:
    """
    One weight vector and bias per class, applied to standardized features
    ``(x - mean) / scale``. The predicted class has the largest margin.
    """

    weights: np.ndarray  # (C, d)
    bias: np.ndarray     # (C,)
    mean: np.ndarray     # (d,)
    scale: np.ndarray    # (d,)
    lam: float
    epochs: int
    seed: int
    class_names: tuple
    feature_names: tuple

    kind = "svm"

    def __post_init__(self):
        for name in ("weights", "bias", "mean", "scale"):
            _frozen_array(self, name)

    @property
    def n_classes(self):
        return len(self.class_names)

    @property
    def n_features(self):
        return len(self.feature_names)

    def decision_function(self, X):
        Z = (np.asarray(X, dtype=np.float64) - self.mean) / self.scale
        return Z @ self.weights.T + self.bias

    def predict(self, X):
        return np.argmax(self.decision_function(X), axis=1).astype(np.int64)


def train_linear_svm(
    ds: LabeledDataset, lam: float = 1e-3, epochs: int = 20, seed: int = 0
) -> LinearSvmModel:
    """
    Pegasos stochastic sub-gradient descent on the L2-regularized hinge loss.

    Each class gets a binary problem (its samples +1, the rest -1). The bias
    rides along as a constant feature. Every epoch visits the samples in a
    fresh seeded permutation shared by all the binary problems.
    """
    if ds.n_samples == 0:
        raise EmptyDataset("cannot train on an empty dataset")
    if not lam > 0:
        raise ValueError(f"regularization lam must be positive, got {lam}")
    if epochs < 1:
        raise ValueError("epochs must be >= 1")
    X = ds.features.astype(np.float64)
    mean = X.mean(axis=0)
    scale = X.std(axis=0)
    scale[scale == 0] = 1.0
    Z = np.hstack([(X - mean) / scale, np.ones((ds.n_samples, 1))])

    rng = np.random.default_rng(seed)
    orders = [rng.permutation(ds.n_samples) for _ in range(epochs)]
    C, d1 = ds.n_classes, Z.shape[1]
    W = np.zeros((C, d1))
    for c in range(C):
        target = np.where(ds.labels == c, 1.0, -1.0)
        w = np.zeros(d1)
        t = 0
        for order in orders:
            for i in order:
                t += 1
                eta = 1.0 / (lam * t)
                margin = target[i] * (w @ Z[i])
                w *= 1.0 - eta * lam
                if margin < 1.0:
                    w += eta * target[i] * Z[i]
        W[c] = w
    return LinearSvmModel(
        W[:, :-1], W[:, -1], mean, scale, float(lam), int(epochs), int(seed),
        ds.class_names, ds.feature_names,
    )


def _require_all_classes(ds: LabeledDataset):
    if ds.n_samples == 0:
        raise EmptyDataset("cannot train on an empty dataset")
    counts = ds.class_counts()
    if (counts == 0).any():
        missing = [ds.class_names[c] for c in np.flatnonzero(counts == 0)]
        raise ClassAbsent(f"no training samples for classes {missing}")
    return counts


@dataclass(frozen=True, eq=False)
class GaussianNbModel:
    means: np.ndarray       # (C, d)
    variances: np.ndarray   # (C, d), smoothing already added
    log_priors: np.ndarray  # (C,)
    epsilon: float
    class_names: tuple
    feature_names: tuple

    kind = "naive_bayes"

    def __post_init__(self):
        for name in ("means", "variances", "log_priors"):
            _frozen_array(self, name)

    @property
    def n_classes(self):
        return len(self.class_names)

    @property
    def n_features(self):
        return len(self.feature_names)

    @property
    def priors(self):
        return np.exp(self.log_priors)

    def log_joint(self, X):
        X = np.asarray(X, dtype=np.float64)
        diff = X[:, None, :] - self.means[None, :, :]
        ll = -0.5 * (np.log(2.0 * np.pi * self.variances)[None] + diff * diff / self.variances[None])
        return self.log_priors[None, :] + ll.sum(axis=2)

    def predict(self, X):
        return np.argmax(self.log_joint(X), axis=1).astype(np.int64)


def train_gaussian_nb(ds: LabeledDataset, epsilon: Optional[float] = None) -> GaussianNbModel:
    """
    Per-class feature means and (population) variances plus ``epsilon``;
    by default ``epsilon = 1e-9 * max feature variance`` over all samples.
    """
    counts = _require_all_classes(ds)
    X = ds.features.astype(np.float64)
    if epsilon is None:
        epsilon = 1e-9 * float(X.var(axis=0).max())
    if epsilon < 0:
        raise ValueError("epsilon must be >= 0")
    means = np.array([X[ds.labels == c].mean(axis=0) for c in range(ds.n_classes)])
    variances = np.array([X[ds.labels == c].var(axis=0) for c in range(ds.n_classes)]) + epsilon
    if (variances <= 0).any():
        # a constant feature over the whole dataset leaves nothing to scale by
        variances = np.where(variances <= 0, np.finfo(float).tiny, variances)
    log_priors = np.log(counts / counts.sum())
    return GaussianNbModel(means, variances, log_priors, float(epsilon), ds.class_names, ds.feature_names)


@dataclass(frozen=True, eq=False)
class CentroidModel:
    centroids: np.ndarray  # (C, d)
    class_names: tuple
    feature_names: tuple

    kind = "min_distance"

    def __post_init__(self):
        _frozen_array(self, "centroids")

    @property
    def n_classes(self):
        return len(self.class_names)

    @property
    def n_features(self):
        return len(self.feature_names)

    def predict(self, X):
        X = np.asarray(X, dtype=np.float64)
        diff = X[:, None, :] - self.centroids[None, :, :]
        return np.argmin((diff * diff).sum(axis=2), axis=1).astype(np.int64)


def train_min_distance(ds: LabeledDataset) -> CentroidModel:
    _require_all_classes(ds)
    X = ds.features.astype(np.float64)
    centroids = np.array([X[ds.labels == c].mean(axis=0) for c in range(ds.n_classes)])
    return CentroidModel(centroids, ds.class_names, ds.feature_names)
