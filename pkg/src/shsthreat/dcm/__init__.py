"""Disease classification models: decision tree, logistic regression, rectifier network."""
from __future__ import annotations

import json
from pathlib import Path

from ..data import Dataset
from ..errors import DimensionMismatch, EmptyDataset
from .logistic import LogisticRegressionModel, Scaler, train_lr
from .metrics import Metrics, confusion_matrix, metrics_from_confusion
from .neural import DEFAULT_HIDDEN, NeuralNetworkModel, train_nn
from .tree import DecisionTreeModel, TreeNode, train_dt

MODEL_VERSION = 1
_KINDS = {"dt": DecisionTreeModel, "lr": LogisticRegressionModel, "nn": NeuralNetworkModel}


def predict(model, P) -> int:
    return model.predict(P)


def evaluate(model, test: Dataset) -> Metrics:
    if len(test) == 0:
        raise EmptyDataset("cannot evaluate on an empty dataset")
    if test.schema.n_s != model.n_s:
        raise DimensionMismatch(f"model expects {model.n_s} sensors, data has {test.schema.n_s}")
    pred = model.predict_batch(test.X)
    n = max(model.n_l, test.schema.n_l)
    return metrics_from_confusion(confusion_matrix(test.y, pred, n))


def model_to_dict(model) -> dict:
    return {"version": MODEL_VERSION, **model.to_dict()}


def model_from_dict(d: dict):
    if d.get("version") != MODEL_VERSION:
        raise ValueError(f"unsupported model version {d.get('version')!r}")
    try:
        cls = _KINDS[d["kind"]]
    except KeyError:
        raise ValueError(f"unknown model kind {d.get('kind')!r}") from None
    return cls.from_dict(d)


def save_model(model, path, extra: dict | None = None) -> None:
    d = model_to_dict(model)
    if extra:
        d["provenance"] = extra
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    Path(path).write_text(json.dumps(d, indent=1))


def load_model(path):
    return model_from_dict(json.loads(Path(path).read_text()))


def train(kind: str, train_set: Dataset, **params):
    if kind == "dt":
        return train_dt(train_set, **params)
    if kind == "lr":
        return train_lr(train_set, **params)
    if kind == "nn":
        return train_nn(train_set, **params)
    raise ValueError(f"unknown model kind {kind!r}")


__all__ = [
    "DEFAULT_HIDDEN", "DecisionTreeModel", "LogisticRegressionModel", "Metrics", "NeuralNetworkModel",
    "Scaler", "TreeNode", "confusion_matrix", "evaluate", "load_model", "metrics_from_confusion",
    "model_from_dict", "model_to_dict", "predict", "save_model", "train", "train_dt", "train_lr", "train_nn",
]
