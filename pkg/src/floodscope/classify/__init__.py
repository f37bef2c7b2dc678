"""From-scratch classifiers behind one prediction contract, plus evaluation metrics."""

from floodscope.classify.dataset import (
    LabeledDataset,
    format_samples_csv,
    parse_samples_csv,
    read_samples_csv,
    stratified_split,
)
from floodscope.classify.forest import (
    DecisionTree,
    ForestModel,
    best_split,
    fit_tree,
    train_random_forest,
)
from floodscope.classify.metrics import (
    ClassificationScores,
    ConfusionMatrix,
    MetricsReport,
    classification_metrics,
    confusion_matrix,
)
from floodscope.classify.models import (
    CentroidModel,
    GaussianNbModel,
    LinearSvmModel,
    train_gaussian_nb,
    train_linear_svm,
    train_min_distance,
)
from floodscope.classify.predict import (
    MODEL_DISPLAY_NAMES,
    classify_raster,
    compare_classifiers,
    evaluate_model,
    predict_labels,
    train_model,
)
from floodscope.classify.serialize import deserialize_model, load_model, save_model, serialize_model

__all__ = [
    "CentroidModel",
    "ClassificationScores",
    "ConfusionMatrix",
    "DecisionTree",
    "ForestModel",
    "GaussianNbModel",
    "LabeledDataset",
    "LinearSvmModel",
    "MODEL_DISPLAY_NAMES",
    "MetricsReport",
    "best_split",
    "classification_metrics",
    "classify_raster",
    "compare_classifiers",
    "confusion_matrix",
    "deserialize_model",
    "evaluate_model",
    "fit_tree",
    "format_samples_csv",
    "load_model",
    "parse_samples_csv",
    "predict_labels",
    "read_samples_csv",
    "save_model",
    "serialize_model",
    "stratified_split",
    "train_gaussian_nb",
    "train_linear_svm",
    "train_min_distance",
    "train_model",
    "train_random_forest",
]
