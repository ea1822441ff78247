"""One-vs-rest logistic regression on standardised features."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..data import Dataset
from ..errors import DimensionMismatch, DivergenceDetected, EmptyDataset


@dataclass(frozen=True, eq=False)
class Scaler:
    mean: np.ndarray
    std: np.ndarray

    @classmethod
    def fit(cls, X) -> "Scaler":
        X = np.asarray(X, dtype=float)
        std = X.std(axis=0)
        std[std == 0] = 1.0
        return cls(X.mean(axis=0), std)

    def transform(self, X):
        return (np.asarray(X, dtype=float) - self.mean) / self.std

    def to_dict(self):
        return {"mean": self.mean.tolist(), "std": self.std.tolist()}

    @classmethod
    def from_dict(cls, d):
        return cls(np.array(d["mean"], dtype=float), np.array(d["std"], dtype=float))


@dataclass(frozen=True, eq=False)
class LogisticRegressionModel:
    theta: np.ndarray       # (n_l, n_s) weights on standardised inputs
    intercept: np.ndarray   # (n_l,)
    scaler: Scaler

    kind = "lr"

    def __post_init__(self):
        th = np.array(self.theta, dtype=float)
        b = np.array(self.intercept, dtype=float)
        if th.ndim != 2 or b.shape != (th.shape[0],) or self.scaler.mean.shape != (th.shape[1],):
            raise DimensionMismatch("theta, intercept and scaler shapes disagree")
        if not (np.all(np.isfinite(th)) and np.all(np.isfinite(b))):
            raise ValueError("non-finite parameters")
        object.__setattr__(self, "theta", th)
        object.__setattr__(self, "intercept", b)

    @property
    def n_l(self) -> int:
        return self.theta.shape[0]

    @property
    def n_s(self) -> int:
        return self.theta.shape[1]

    def raw_coefficients(self) -> tuple[np.ndarray, np.ndarray]:
        """Weights and biases acting on raw (unstandardised) measurements."""
        W = self.theta / self.scaler.std
        b = self.intercept - W @ self.scaler.mean
        return W, b

    def logits(self, X) -> np.ndarray:
        W, b = self.raw_coefficients()
        return np.asarray(X, dtype=float) @ W.T + b

    def predict(self, P) -> int:
        P = np.asarray(P, dtype=float)
        if P.shape != (self.n_s,):
            raise DimensionMismatch(f"expected {self.n_s} measurements, got {P.shape}")
        return int(np.argmax(self.logits(P[None, :])[0]))

    def predict_batch(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=float).reshape(-1, self.n_s)
        return np.argmax(self.logits(X), axis=1)

    def to_dict(self) -> dict:
        return {"kind": self.kind, "theta": self.theta.tolist(),
                "intercept": self.intercept.tolist(), "scaler": self.scaler.to_dict()}

    @classmethod
    def from_dict(cls, d) -> "LogisticRegressionModel":
        return cls(np.array(d["theta"]), np.array(d["intercept"]), Scaler.from_dict(d["scaler"]))


def _nll(w, b, Z, t):
    s = Z @ w + b
    # log(1 + exp(-s)) for t=1 and log(1 + exp(s)) for t=0, computed stably
    return float(np.mean(np.logaddexp(0.0, -s) * t + np.logaddexp(0.0, s) * (1 - t)))


def train_lr(train: Dataset, iterations: int = 2000, step_size: float = 0.5,
             tolerance: float = 1e-7) -> LogisticRegressionModel:
    """Fit one binary classifier per label by gradient descent on the mean log-loss.

    Each classifier stops once its loss improves by less than ``tolerance``
    or after ``iterations`` steps.
    """
    if len(train) == 0:
        raise EmptyDataset("cannot train on an empty dataset")
    scaler = Scaler.fit(train.X)
    Z = scaler.transform(train.X)
    n, n_s = Z.shape
    n_l = train.schema.n_l
    theta = np.zeros((n_l, n_s))
    intercept = np.zeros(n_l)
    for g in range(n_l):
        t = (train.y == g).astype(float)
        w = np.zeros(n_s)
        b = 0.0
        loss = _nll(w, b, Z, t)
        rising = 0
        for _ in range(iterations):
            p = 0.5 * (1.0 + np.tanh(0.5 * (Z @ w + b)))  # sigmoid
            r = p - t
            w = w - step_size * (Z.T @ r) / n
            b = b - step_size * float(r.mean())
            new = _nll(w, b, Z, t)
            if not np.isfinite(new):
                raise DivergenceDetected(f"label {g}: non-finite loss")
            if new > loss:
                rising += 1
                if rising >= 10:
                    raise DivergenceDetected(f"label {g}: loss increased 10 times in a row")
            else:
                rising = 0
            done = abs(loss - new) < tolerance
            loss = new
            if done:
                break
        theta[g], intercept[g] = w, b
    return LogisticRegressionModel(theta, intercept, scaler)


def lr_loss(model: LogisticRegressionModel, data: Dataset) -> float:
    """Sum over labels of the one-vs-rest mean log-loss."""
    Z = model.scaler.transform(data.X)
    return sum(_nll(model.theta[g], model.intercept[g], Z, (data.y == g).astype(float))
               for g in range(model.n_l))
