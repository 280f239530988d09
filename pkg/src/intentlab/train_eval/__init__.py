"""Training, hyperparameter search, evaluation and latency measurement."""

from .bench import LatencyReport, hardware_descriptor, latency_bench, latency_to_csv
from .grid import DEFAULT_GRID, PAPER_GRID, GridPoint, GridResult, grid_search, model_train_fn, select_best
from .metrics import MetricsReport, confusion_matrix, metrics_from_predictions
from .train import (
    EPOCH_FIELDS, EpochStats, TrainConfig, apply_overrides, build_and_train, epochs_to_csv,
    evaluate, evaluate_model, predict_proba, train,
)

__all__ = [
    "DEFAULT_GRID", "EPOCH_FIELDS", "PAPER_GRID", "EpochStats", "GridPoint", "GridResult",
    "LatencyReport", "MetricsReport", "TrainConfig", "apply_overrides", "build_and_train",
    "confusion_matrix", "epochs_to_csv", "evaluate", "evaluate_model", "grid_search", "hardware_descriptor",
    "latency_bench", "latency_to_csv", "metrics_from_predictions", "model_train_fn",
    "predict_proba", "select_best", "train",
]
