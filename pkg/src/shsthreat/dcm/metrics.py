"""Classification metrics from a confusion matrix."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import EmptyDataset


@dataclass(frozen=True)
class Metrics:
    accuracy: float
    precision: float
    recall: float
    f1: float

    def to_dict(self) -> dict:
        return {"accuracy": self.accuracy, "precision": self.precision,
                "recall": self.recall, "f1": self.f1}


def confusion_matrix(y_true, y_pred, n_labels: int) -> np.ndarray:
    """Rows are true labels, columns predicted labels."""
    cm = np.zeros((n_labels, n_labels), dtype=np.int64)
    np.add.at(cm, (np.asarray(y_true), np.asarray(y_pred)), 1)
    return cm


def metrics_from_confusion(cm: np.ndarray) -> Metrics:
    cm = np.asarray(cm)
    total = cm.sum()
    if total == 0:
        raise EmptyDataset("no predictions to score")
    tp = np.diag(cm).astype(float)
    support = cm.sum(axis=1)
    predicted = cm.sum(axis=0)
    present = support > 0
    with np.errstate(invalid="ignore", divide="ignore"):
        prec = np.where(predicted > 0, tp / predicted, 0.0)
        rec = np.where(support > 0, tp / support, 0.0)
        f1 = np.where(prec + rec > 0, 2 * prec * rec / (prec + rec), 0.0)
    return Metrics(float(tp.sum() / total), float(prec[present].mean()),
                   float(rec[present].mean()), float(f1[present].mean()))
