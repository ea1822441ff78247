"""Feed-forward rectifier network trained with Adam on softmax cross-entropy."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..data import Dataset
from ..errors import DimensionMismatch, EmptyDataset, NonFiniteLoss, UnsupportedActivation
from .logistic import Scaler

DEFAULT_HIDDEN = (20, 12, 8)


@dataclass(frozen=True, eq=False)
class NeuralNetworkModel:
    """Weights act on standardised inputs; ``raw_layers`` folds the scaler into layer one.

    ``weights[m]`` has shape (size of layer m+1, size of layer m).
    """

    weights: tuple
    biases: tuple
    scaler: Scaler
    activation: str = "relu"

    kind = "nn"

    def __post_init__(self):
        if self.activation != "relu":
            raise UnsupportedActivation(f"only relu hidden layers are supported, got {self.activation!r}")
        W = tuple(np.array(w, dtype=float) for w in self.weights)
        b = tuple(np.array(v, dtype=float) for v in self.biases)
        if not W or len(W) != len(b):
            raise DimensionMismatch("need one bias vector per weight matrix")
        for m, (w, v) in enumerate(zip(W, b)):
            if w.ndim != 2 or v.shape != (w.shape[0],):
                raise DimensionMismatch(f"layer {m}: weight {w.shape} and bias {v.shape} disagree")
            if m and w.shape[1] != W[m - 1].shape[0]:
                raise DimensionMismatch(f"layer {m} input size does not match previous output")
            if not (np.all(np.isfinite(w)) and np.all(np.isfinite(v))):
                raise ValueError(f"layer {m}: non-finite parameters")
        if self.scaler.mean.shape != (W[0].shape[1],):
            raise DimensionMismatch("scaler size does not match the input layer")
        object.__setattr__(self, "weights", W)
        object.__setattr__(self, "biases", b)

    @property
    def layer_sizes(self) -> list[int]:
        return [self.weights[0].shape[1]] + [w.shape[0] for w in self.weights]

    @property
    def n_s(self) -> int:
        return self.weights[0].shape[1]

    @property
    def n_l(self) -> int:
        return self.weights[-1].shape[0]

    def raw_layers(self) -> list[tuple[np.ndarray, np.ndarray]]:
        """(W, b) per layer with standardisation absorbed into the first one."""
        W0 = self.weights[0] / self.scaler.std
        b0 = self.biases[0] - W0 @ self.scaler.mean
        return [(W0, b0)] + list(zip(self.weights[1:], self.biases[1:]))

    def logits(self, X) -> np.ndarray:
        h = np.asarray(X, dtype=float)
        layers = self.raw_layers()
        for m, (W, b) in enumerate(layers):
            h = h @ W.T + b
            if m < len(layers) - 1:
                h = np.maximum(h, 0.0)
        return h

    def predict(self, P) -> int:
        P = np.asarray(P, dtype=float)
        if P.shape != (self.n_s,):
            raise DimensionMismatch(f"expected {self.n_s} measurements, got {P.shape}")
        return int(np.argmax(self.logits(P[None, :])[0]))

    def predict_batch(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=float).reshape(-1, self.n_s)
        return np.argmax(self.logits(X), axis=1)

    def to_dict(self) -> dict:
        return {"kind": self.kind, "activation": self.activation,
                "weights": [w.tolist() for w in self.weights],
                "biases": [b.tolist() for b in self.biases],
                "scaler": self.scaler.to_dict()}

    @classmethod
    def from_dict(cls, d) -> "NeuralNetworkModel":
        return cls(tuple(np.array(w, dtype=float).reshape(len(b), -1) for w, b in zip(d["weights"], d["biases"])),
                   tuple(np.array(b, dtype=float) for b in d["biases"]),
                   Scaler.from_dict(d["scaler"]), d.get("activation", "relu"))


def _forward(params, Z):
    acts = [Z]
    pre = []
    h = Z
    L = len(params) // 2
    for m in range(L):
        z = h @ params[2 * m].T + params[2 * m + 1]
        pre.append(z)
        h = np.maximum(z, 0.0) if m < L - 1 else z
        acts.append(h)
    return pre, acts


def loss_and_grad(params, Z, y):
    """Mean cross-entropy of softmax(logits) and its gradient w.r.t. ``params``.

    ``params`` is the flat list [W0, b0, W1, b1, ...] on standardised inputs.
    """
    pre, acts = _forward(params, Z)
    logits = acts[-1]
    shift = logits - logits.max(axis=1, keepdims=True)
    logp = shift - np.log(np.exp(shift).sum(axis=1, keepdims=True))
    n = len(Z)
    loss = -float(logp[np.arange(n), y].mean())
    delta = np.exp(logp)
    delta[np.arange(n), y] -= 1.0
    delta /= n
    L = len(params) // 2
    grads = [None] * len(params)
    for m in range(L - 1, -1, -1):
        grads[2 * m] = delta.T @ acts[m]
        grads[2 * m + 1] = delta.sum(axis=0)
        if m:
            delta = (delta @ params[2 * m]) * (pre[m - 1] > 0)
    return loss, grads


def _init(sizes, rng):
    params = []
    for n_in, n_out in zip(sizes[:-1], sizes[1:]):
        # He initialisation for rectifier layers
        params.append(rng.normal(0.0, np.sqrt(2.0 / n_in), size=(n_out, n_in)))
        params.append(np.zeros(n_out))
    return params


def train_nn(train: Dataset, hidden=DEFAULT_HIDDEN, epochs: int = 200, step_size: float = 1e-3,
             batch: int = 64, seed: int = 0) -> NeuralNetworkModel:
    if len(train) == 0:
        raise EmptyDataset("cannot train on an empty dataset")
    hidden = tuple(int(h) for h in hidden)
    if not hidden or min(hidden) < 1:
        raise ValueError("hidden layer sizes must be positive and non-empty")
    rng = np.random.default_rng(seed)
    scaler = Scaler.fit(train.X)
    Z = scaler.transform(train.X)
    y = np.asarray(train.y, dtype=np.int64)
    sizes = [train.schema.n_s, *hidden, train.schema.n_l]
    params = _init(sizes, rng)
    m1 = [np.zeros_like(p) for p in params]
    m2 = [np.zeros_like(p) for p in params]
    beta1, beta2, eps = 0.9, 0.999, 1e-8
    t = 0
    n = len(Z)
    batch = max(1, min(int(batch), n))
    for _ in range(epochs):
        order = rng.permutation(n)
        for s in range(0, n, batch):
            idx = order[s:s + batch]
            loss, grads = loss_and_grad(params, Z[idx], y[idx])
            if not np.isfinite(loss):
                raise NonFiniteLoss("training loss became non-finite")
            t += 1
            for i, g in enumerate(grads):
                m1[i] = beta1 * m1[i] + (1 - beta1) * g
                m2[i] = beta2 * m2[i] + (1 - beta2) * g * g
                mhat = m1[i] / (1 - beta1 ** t)
                vhat = m2[i] / (1 - beta2 ** t)
                params[i] = params[i] - step_size * mhat / (np.sqrt(vhat) + eps)
    return NeuralNetworkModel(tuple(params[0::2]), tuple(params[1::2]), scaler)
