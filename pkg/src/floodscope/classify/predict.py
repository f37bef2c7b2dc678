"""Shared prediction contract, raster classification and model evaluation."""

from __future__ import annotations

from typing import Sequence

import numpy as np

from floodscope.classify.dataset import LabeledDataset, stratified_split
from floodscope.classify.forest import train_random_forest
from floodscope.classify.metrics import MetricsReport, classification_metrics, confusion_matrix
from floodscope.classify.models import train_gaussian_nb, train_linear_svm, train_min_distance
from floodscope.errors import DimensionMismatch, InvalidFeature
from floodscope.raster import Band, Mask, RasterGrid, check_aligned

# display names used in the comparison table, keyed by model.kind
MODEL_DISPLAY_NAMES = {
    "forest": "Random Forest",
    "svm": "SVM",
    "naive_bayes": "Naive Bayes",
    "min_distance": "Minimum Distance",
}

TRAINERS = {
    "forest": train_random_forest,
    "svm": train_linear_svm,
    "naive_bayes": train_gaussian_nb,
    "min_distance": train_min_distance,
}


def predict_labels(model, features) -> np.ndarray:
    """Class indices for an (m, d) feature matrix; ties always resolve to the lowest index."""
    X = np.asarray(features, dtype=np.float32)
    if X.ndim == 1:
        X = X[None, :]
    if X.ndim != 2 or X.shape[1] != model.n_features:
        raise DimensionMismatch(
            f"model expects {model.n_features} features, got matrix of shape {X.shape}"
        )
    if np.isnan(X).any():
        raise InvalidFeature("feature matrix contains NaN")
    if len(X) == 0:
        return np.empty(0, dtype=np.int64)
    return model.predict(X)


def classify_raster(
    model, grid: RasterGrid, feature_bands: Sequence[str], validity: Mask | None = None
) -> RasterGrid:
    """
    Per-pixel prediction over a grid. Pixels outside ``validity`` or with any
    NaN feature get nodata; the result is a one-band float32 class map.
    """
    if len(feature_bands) != model.n_features:
        raise DimensionMismatch(
            f"model expects {model.n_features} features, {len(feature_bands)} bands given"
        )
    stack = np.stack([grid.band(name).values for name in feature_bands], axis=-1)
    valid = ~np.isnan(stack).any(axis=-1)
    if validity is not None:
        check_aligned(grid, validity)
        valid &= validity.bits
    classes = np.full(grid.shape, np.nan, dtype=np.float32)
    if valid.any():
        classes[valid] = predict_labels(model, stack[valid]).astype(np.float32)
    return RasterGrid(grid.geotransform, [Band("class", classes)], grid.acquisition_date)


def train_model(kind: str, ds: LabeledDataset, **params):
    if kind not in TRAINERS:
        raise ValueError(f"unknown classifier {kind!r}; choose from {sorted(TRAINERS)}")
    return TRAINERS[kind](ds, **params)


def evaluate_model(model, train: LabeledDataset, validation: LabeledDataset, average: str = "macro") -> MetricsReport:
    train_cm = confusion_matrix(train.labels, predict_labels(model, train.features), train.n_classes)
    val_cm = confusion_matrix(validation.labels, predict_labels(model, validation.features), validation.n_classes)
    train_scores = classification_metrics(train_cm, average)
    val_scores = classification_metrics(val_cm, average)
    return MetricsReport(
        model_name=MODEL_DISPLAY_NAMES.get(model.kind, model.kind),
        training_accuracy=train_scores.accuracy,
        validation_accuracy=val_scores.accuracy,
        macro_recall=val_scores.recall,
        macro_f1=val_scores.f1,
        macro_precision=val_scores.precision,
    )


def compare_classifiers(
    ds: LabeledDataset,
    kinds: Sequence[str] = ("forest", "svm", "naive_bayes", "min_distance"),
    seed: int = 0,
    params: dict | None = None,
    validation_fraction: float = 0.2,
):
    """Train each classifier on one stratified split; return (models, metric rows)."""
    params = params or {}
    train, validation = stratified_split(ds, validation_fraction, seed)
    models, rows = {}, []
    for kind in kinds:
        kw = dict(params.get(kind, {}))
        if kind in ("forest", "svm"):
            kw.setdefault("seed", seed)
        model = train_model(kind, train, **kw)
        models[kind] = model
        rows.append(evaluate_model(model, train, validation))
    return models, rows
