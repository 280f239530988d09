"""Confusion matrix and derived scores."""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from ..errors import EmptySplit


def confusion_matrix(y_true, y_pred, num_classes: int) -> np.ndarray:
    """Rows are true classes, columns predicted."""
    y_true = np.asarray(y_true, dtype=np.int64)
    y_pred = np.asarray(y_pred, dtype=np.int64)
    cm = np.zeros((num_classes, num_classes), dtype=np.int64)
    np.add.at(cm, (y_true, y_pred), 1)
    return cm


def _safe_div(num, den):
    num = np.asarray(num, dtype=np.float64)
    den = np.asarray(den, dtype=np.float64)
    return np.divide(num, den, out=np.zeros_like(num), where=den != 0)


@dataclass
class MetricsReport:
    matrix: np.ndarray
    accuracy: float
    precision: np.ndarray
    recall: np.ndarray
    f1: np.ndarray
    support: np.ndarray
    weighted_f1: float

    @classmethod
    def from_matrix(cls, cm) -> "MetricsReport":
        cm = np.asarray(cm, dtype=np.int64)
        total = int(cm.sum())
        if total == 0:
            raise EmptySplit("cannot score an empty confusion matrix")
        tp = np.diag(cm)
        support = cm.sum(axis=1)
        predicted = cm.sum(axis=0)
        precision = _safe_div(tp, predicted)
        recall = _safe_div(tp, support)
        f1 = _safe_div(2 * precision * recall, precision + recall)
        weighted_f1 = float((support * f1).sum() / support.sum())
        return cls(cm, int(np.trace(cm)) / total, precision, recall, f1, support, weighted_f1)

    @property
    def balanced_accuracy(self) -> float:
        """Mean recall over classes that occur; 1/K for any constant predictor."""
        return float(self.recall[self.support > 0].mean())

    def to_dict(self, class_names=None) -> dict:
        k = self.matrix.shape[0]
        names = list(class_names) if class_names else [str(i) for i in range(k)]
        return {
            "matrix": self.matrix.tolist(),
            "per_class": [
                {"class": names[i], "precision": float(self.precision[i]), "recall": float(self.recall[i]),
                 "f1": float(self.f1[i]), "support": int(self.support[i])}
                for i in range(k)
            ],
            "accuracy": self.accuracy,
            "weighted_f1": self.weighted_f1,
            "balanced_accuracy": self.balanced_accuracy,
        }

    def to_json(self, class_names=None) -> str:
        return json.dumps(self.to_dict(class_names), indent=2) + "\n"


def metrics_from_predictions(y_true, y_pred, num_classes: int) -> MetricsReport:
    if len(y_true) == 0:
        raise EmptySplit("no examples to evaluate")
    return MetricsReport.from_matrix(confusion_matrix(y_true, y_pred, num_classes))
