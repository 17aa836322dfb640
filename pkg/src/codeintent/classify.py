"""Discriminative models trained on probabilistic labels.

Both models minimize mean binary cross-entropy against soft targets in [0, 1]
with plain mini-batch SGD. Each exposes ``params()`` (the live parameter arrays)
and ``loss_and_grad(X, t)`` so the same finite-difference checker covers both.
"""

from __future__ import annotations

import json
import logging
from dataclasses import asdict, dataclass, field
from typing import Sequence

import numpy as np

from .embedding import EmbeddingTable, featurize
from .text import default_stopwords, remove_stopwords, tokenize

log = logging.getLogger(__name__)


_P_MIN = np.finfo(np.float64).tiny
_P_MAX = 1.0 - np.finfo(np.float64).epsneg


def sigmoid(z):
    """Logistic function, kept strictly inside (0, 1) even where it would round to 0 or 1."""
    return np.clip(0.5 * (1.0 + np.tanh(0.5 * np.asarray(z, dtype=np.float64))), _P_MIN, _P_MAX)


def bce(logits: np.ndarray, targets: np.ndarray) -> float:
    """Mean binary cross-entropy computed from logits (stable for large |z|)."""
    z = np.asarray(logits, dtype=np.float64)
    t = np.asarray(targets, dtype=np.float64)
    return float(np.mean(np.logaddexp(0.0, z) - t * z))


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 20
    batch_size: int = 32
    learning_rate: float = 0.05
    seed: int = 0
    label_mode: str = "soft"
    validation_fraction: float = 0.0
    l2: float = 1e-4

    def __post_init__(self):
        if self.epochs < 1 or self.batch_size < 1 or not self.learning_rate > 0:
            raise ValueError(f"invalid training config {self}")
        if self.label_mode not in ("soft", "hard"):
            raise ValueError(f"label_mode must be soft or hard, got {self.label_mode!r}")


@dataclass
class LogisticModel:
    weights: np.ndarray
    bias: np.ndarray = field(default_factory=lambda: np.zeros(1))
    l2: float = 0.0

    kind = "logistic"

    def __post_init__(self):
        self.weights = np.asarray(self.weights, dtype=np.float64)
        self.bias = np.asarray(self.bias, dtype=np.float64).reshape(1)

    @classmethod
    def zeros(cls, dim: int, l2: float = 0.0) -> "LogisticModel":
        return cls(np.zeros(dim), np.zeros(1), l2)

    def params(self) -> list[np.ndarray]:
        return [self.weights, self.bias]

    def logits(self, X: np.ndarray) -> np.ndarray:
        X = np.asarray(X, dtype=np.float64)
        if X.shape[-1] != self.weights.shape[0]:
            raise ValueError(f"expected {self.weights.shape[0]} features, got {X.shape[-1]}")
        return X @ self.weights + self.bias[0]

    def predict_proba(self, X: np.ndarray) -> np.ndarray:
        return sigmoid(self.logits(X))

    def loss_and_grad(self, X, t):
        X = np.atleast_2d(np.asarray(X, dtype=np.float64))
        t = np.atleast_1d(np.asarray(t, dtype=np.float64))
        z = self.logits(X)
        loss = bce(z, t) + self.l2 * float(self.weights @ self.weights)
        dz = (sigmoid(z) - t) / len(t)
        return loss, [X.T @ dz + 2 * self.l2 * self.weights, np.array([dz.sum()])]

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "shapes": {"weights": list(self.weights.shape)},
            "hyperparameters": {"l2": self.l2},
            "parameters": {"weights": self.weights.tolist(), "bias": self.bias.tolist()},
        }

    @classmethod
    def from_dict(cls, d: dict) -> "LogisticModel":
        p = d["parameters"]
        return cls(np.array(p["weights"]), np.array(p["bias"]), d["hyperparameters"]["l2"])


def predict_logistic(model: LogisticModel, x: np.ndarray) -> float:
    x = np.asarray(x, dtype=np.float64)
    if x.shape != model.weights.shape:
        raise ValueError(f"expected a vector of shape {model.weights.shape}, got {x.shape}")
    return float(model.predict_proba(x))


@dataclass
class TextCnnModel:
    """Convolutions over the token axis, ReLU, global max-pool, one sigmoid unit.

    ``filters[i]`` has shape (width_i, dim, F_i); ``dense`` has one weight per
    pooled feature, in width order.
    """

    filters: list[np.ndarray]
    conv_biases: list[np.ndarray]
    dense: np.ndarray
    dense_bias: np.ndarray

    kind = "cnn"

    def __post_init__(self):
        self.filters = [np.asarray(f, dtype=np.float64) for f in self.filters]
        self.conv_biases = [np.asarray(b, dtype=np.float64) for b in self.conv_biases]
        self.dense = np.asarray(self.dense, dtype=np.float64)
        self.dense_bias = np.asarray(self.dense_bias, dtype=np.float64).reshape(1)
        dims = {f.shape[1] for f in self.filters}
        if len(dims) != 1:
            raise ValueError("all filters must share the embedding dimension")
        for f, b in zip(self.filters, self.conv_biases, strict=True):
            if b.shape != (f.shape[2],):
                raise ValueError("conv bias shape does not match filter count")
        if self.dense.shape != (sum(f.shape[2] for f in self.filters),):
            raise ValueError("dense layer size does not match pooled features")

    @classmethod
    def init(cls, dim: int, widths: Sequence[int] = (2, 3, 4), n_filters: int = 64,
             seed: int = 0, scale: float = 0.05) -> "TextCnnModel":
        rng = np.random.default_rng(seed)
        filters = [rng.uniform(-scale, scale, (w, dim, n_filters)) for w in widths]
        biases = [rng.uniform(-scale, scale, n_filters) for _ in widths]
        dense = rng.uniform(-scale, scale, n_filters * len(widths))
        return cls(filters, biases, dense, rng.uniform(-scale, scale, 1))

    @property
    def widths(self) -> list[int]:
        return [f.shape[0] for f in self.filters]

    @property
    def dim(self) -> int:
        return self.filters[0].shape[1]

    def params(self) -> list[np.ndarray]:
        return [*self.filters, *self.conv_biases, self.dense, self.dense_bias]

    def _forward(self, X):
        X = np.asarray(X, dtype=np.float64)
        if X.ndim == 2:
            X = X[None]
        B, T, d = X.shape
        if d != self.dim:
            raise ValueError(f"expected token vectors of size {self.dim}, got {d}")
        if T < max(self.widths):
            raise ValueError(f"sequence length {T} is shorter than the widest filter {max(self.widths)}")
        cache = []
        pooled = []
        for W, b in zip(self.filters, self.conv_biases):
            w = W.shape[0]
            P = T - w + 1
            pre = b + sum(X[:, k:k + P, :] @ W[k] for k in range(w))  # (B, P, F)
            arg = pre.argmax(axis=1)  # (B, F); relu is monotone so max commutes
            top = np.take_along_axis(pre, arg[:, None, :], axis=1)[:, 0, :]
            pooled.append(np.maximum(top, 0.0))
            cache.append((arg, top))
        H = np.concatenate(pooled, axis=1)
        return H @ self.dense + self.dense_bias[0], H, (X, cache)

    def logits(self, X) -> np.ndarray:
        return self._forward(X)[0]

    def predict_proba(self, X) -> np.ndarray:
        return sigmoid(self.logits(X))

    def loss_and_grad(self, X, t):
        z, H, (X, cache) = self._forward(X)
        t = np.atleast_1d(np.asarray(t, dtype=np.float64))
        loss = bce(z, t)
        dz = (sigmoid(z) - t) / len(t)  # (B,)
        d_dense = H.T @ dz
        dH = dz[:, None] * self.dense[None, :]
        d_filters, d_biases = [], []
        offset = 0
        rows = np.arange(X.shape[0])[:, None]
        for (arg, top), W in zip(cache, self.filters):
            F = W.shape[2]
            d_top = dH[:, offset:offset + F] * (top > 0)  # (B, F)
            offset += F
            # only the max-pooled window of each filter receives gradient
            d_filters.append(np.stack([
                np.einsum("bf,bfd->df", d_top, X[rows, arg + k]) for k in range(W.shape[0])
            ]))
            d_biases.append(d_top.sum(axis=0))
        return loss, [*d_filters, *d_biases, d_dense, np.array([dz.sum()])]

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "shapes": {"filters": [list(f.shape) for f in self.filters], "dense": list(self.dense.shape)},
            "hyperparameters": {"widths": self.widths, "filters_per_width": [f.shape[2] for f in self.filters]},
            "parameters": {
                "filters": [f.tolist() for f in self.filters],
                "conv_biases": [b.tolist() for b in self.conv_biases],
                "dense": self.dense.tolist(),
                "dense_bias": self.dense_bias.tolist(),
            },
        }

    @classmethod
    def from_dict(cls, d: dict) -> "TextCnnModel":
        p = d["parameters"]
        return cls([np.array(f) for f in p["filters"]], [np.array(b) for b in p["conv_biases"]],
                   np.array(p["dense"]), np.array(p["dense_bias"]))


def cnn_forward(model: TextCnnModel, seq: np.ndarray) -> float:
    return float(model.predict_proba(np.asarray(seq)[None])[0])


def _targets(labels, mode: str) -> np.ndarray:
    t = np.asarray(labels, dtype=np.float64)
    if t.size and (t.min() < 0 or t.max() > 1):
        raise ValueError("targets must lie in [0, 1]")
    return (t >= 0.5).astype(np.float64) if mode == "hard" else t


def sgd(model, X: np.ndarray, t: np.ndarray, config: TrainConfig) -> list[float]:
    """Mini-batch SGD in place; returns the mean minibatch loss of each epoch."""
    rng = np.random.default_rng(config.seed)
    m = len(t)
    history = []
    for epoch in range(config.epochs):
        order = rng.permutation(m)
        total = 0.0
        for start in range(0, m, config.batch_size):
            idx = order[start:start + config.batch_size]
            loss, grads = model.loss_and_grad(X[idx], t[idx])
            total += loss * len(idx)
            for p, g in zip(model.params(), grads):
                p -= config.learning_rate * g
        history.append(total / m)
        log.debug("%s epoch %d loss %.5f", model.kind, epoch + 1, history[-1])
    return history


def train_logistic(features: np.ndarray, labels, config: TrainConfig = TrainConfig()) -> LogisticModel:
    X = np.asarray(features, dtype=np.float64)
    if len(X) == 0:
        raise ValueError("no training examples")
    t = _targets(labels, config.label_mode)
    if X.ndim != 2 or len(t) != len(X):
        raise ValueError("features must be (m, d) with one target per row")
    model = LogisticModel.zeros(X.shape[1], config.l2)
    model.loss_history = sgd(model, X, t, config)
    return model


# Plain SGD on sequence inputs needs a larger step than the usual Adam-style default.
CNN_DEFAULTS = TrainConfig(epochs=40, learning_rate=0.3, l2=0.0)


def train_cnn(seqs: np.ndarray, labels, config: TrainConfig = CNN_DEFAULTS,
              widths: Sequence[int] = (2, 3, 4), n_filters: int = 64) -> TextCnnModel:
    X = np.asarray(seqs, dtype=np.float64)
    if len(X) == 0:
        raise ValueError("no training examples")
    t = _targets(labels, config.label_mode)
    if X.ndim != 3 or len(t) != len(X):
        raise ValueError("sequences must be (m, max_len, d) with one target per row")
    model = TextCnnModel.init(X.shape[2], widths, n_filters, seed=config.seed)
    model.loss_history = sgd(model, X, t, config)
    return model


def gradient_check(model, X, t, eps: float = 1e-6, floor: float = 1e-3) -> float:
    """Largest relative gap between analytic and central-difference partials.

    Relative error is ``|a - n| / max(|a|, |n|, floor)``, so partials smaller
    than ``floor`` are compared in absolute terms (rounding noise in the
    difference quotient is ~1e-10 and would swamp a pure ratio near zero).
    """
    if not 1e-8 <= eps <= 1e-4:
        raise ValueError("eps must lie in [1e-8, 1e-4]")
    _, grads = model.loss_and_grad(X, t)
    worst = 0.0
    for p, g in zip(model.params(), grads):
        flat, gflat = p.reshape(-1), g.reshape(-1)
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + eps
            up = model.loss_and_grad(X, t)[0]
            flat[i] = orig - eps
            down = model.loss_and_grad(X, t)[0]
            flat[i] = orig
            num = (up - down) / (2 * eps)
            err = abs(gflat[i] - num) / max(abs(gflat[i]), abs(num), floor)
            worst = max(worst, err)
    return worst


def model_from_dict(d: dict):
    kinds = {"logistic": LogisticModel, "cnn": TextCnnModel}
    if d["kind"] not in kinds:
        raise ValueError(f"unknown model kind {d['kind']!r}")
    return kinds[d["kind"]].from_dict(d)


@dataclass
class Classifier:
    """Raw query in, code-search probability out."""

    table: EmbeddingTable
    model: LogisticModel | TextCnnModel
    stopwords: frozenset[str] = field(default_factory=default_stopwords)
    threshold: float = 0.5
    max_len: int = 16

    def features(self, texts: Sequence[str]) -> np.ndarray:
        tokens = [remove_stopwords(tokenize(t), self.stopwords) for t in texts]
        return featurize(tokens, self.table, self.model.kind, self.max_len)

    def predict_proba(self, texts: Sequence[str]) -> np.ndarray:
        if not len(texts):
            return np.zeros(0)
        return self.model.predict_proba(self.features(texts))

    def predict(self, texts: Sequence[str]) -> np.ndarray:
        return (self.predict_proba(texts) >= self.threshold).astype(np.int64)

    def save(self, path, extra: dict | None = None) -> None:
        d = {"model": self.model.to_dict(), "threshold": self.threshold, "max_len": self.max_len}
        d.update(extra or {})
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(d, fh, sort_keys=True)
            fh.write("\n")

    @classmethod
    def load(cls, path, table: EmbeddingTable, stopwords=None) -> "Classifier":
        with open(path, encoding="utf-8") as fh:
            d = json.load(fh)
        return cls(table, model_from_dict(d["model"]),
                   default_stopwords() if stopwords is None else stopwords,
                   d["threshold"], d["max_len"])


def classify_query(classifier: Classifier, text: str) -> dict:
    p = float(classifier.predict_proba([text])[0])
    return {"label": int(p >= classifier.threshold), "probability": p}
