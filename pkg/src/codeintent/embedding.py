"""Query featurization: vocabulary, skip-gram embeddings trained from scratch, pooling."""

from __future__ import annotations

import logging
from collections import Counter
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .text import remove_stopwords, tokenize  # noqa: F401  (re-exported)

log = logging.getLogger(__name__)


@dataclass
class Vocabulary:
    index: dict[str, int]
    counts: list[int]
    min_count: int = 1

    def __len__(self):
        return len(self.index)

    def __contains__(self, token):
        return token in self.index

    @property
    def tokens(self) -> list[str]:
        return sorted(self.index, key=self.index.__getitem__)


def build_vocab(corpus: Iterable[Sequence[str]], min_count: int = 1) -> Vocabulary:
    """Keep tokens seen at least ``min_count`` times; most frequent gets index 0."""
    if min_count < 1:
        raise ValueError("min_count must be >= 1")
    counts = Counter(t for tokens in corpus for t in tokens)
    kept = sorted((t for t, c in counts.items() if c >= min_count), key=lambda t: (-counts[t], t))
    if not kept:
        raise ValueError(f"no token occurs at least {min_count} times")
    return Vocabulary({t: i for i, t in enumerate(kept)}, [counts[t] for t in kept], min_count)


@dataclass(frozen=True)
class SkipGramConfig:
    dim: int = 100
    window: int = 3
    negatives: int = 5
    epochs: int = 10
    learning_rate: float = 0.025
    min_lr_fraction: float = 1e-4
    min_count: int = 2
    batch_size: int = 64


@dataclass
class EmbeddingTable:
    vocab: Vocabulary
    vectors: np.ndarray
    context: np.ndarray | None = field(default=None, repr=False)
    loss_history: list[float] = field(default_factory=list, repr=False)

    @property
    def dim(self) -> int:
        return self.vectors.shape[1]

    def __getitem__(self, token: str) -> np.ndarray:
        return self.vectors[self.vocab.index[token]]

    def similarity(self, a: str, b: str) -> float:
        u, v = self[a], self[b]
        return float(u @ v / (np.linalg.norm(u) * np.linalg.norm(v)))

    def save(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(f"{len(self.vocab)} {self.dim}\n")
            for token, vec in zip(self.vocab.tokens, self.vectors):
                fh.write(token + " " + " ".join(repr(float(x)) for x in vec) + "\n")

    @classmethod
    def load(cls, path) -> "EmbeddingTable":
        with open(path, encoding="utf-8") as fh:
            n, d = map(int, fh.readline().split())
            tokens, rows = [], []
            for line in fh:
                parts = line.split()
                if not parts:
                    continue
                tokens.append(parts[0])
                rows.append([float(x) for x in parts[1:]])
        vectors = np.array(rows, dtype=np.float64).reshape(n, d)
        vocab = Vocabulary({t: i for i, t in enumerate(tokens)}, [0] * n)
        return cls(vocab, vectors)

    @classmethod
    def from_dict(cls, mapping: dict[str, Sequence[float]]) -> "EmbeddingTable":
        tokens = list(mapping)
        vocab = Vocabulary({t: i for i, t in enumerate(tokens)}, [1] * len(tokens))
        return cls(vocab, np.array([mapping[t] for t in tokens], dtype=np.float64))


def _sigmoid(x):
    return 0.5 * (1.0 + np.tanh(0.5 * x))


def _log_sigmoid(x):
    return -np.logaddexp(0.0, -x)


def pair_loss_and_grad(center: np.ndarray, context: np.ndarray, negatives: np.ndarray):
    """Negative-sampling loss for one (center, context) pair and its gradients.

    loss = -log s(u_ctx . v) - sum_k log s(-u_k . v)

    Returns ``(loss, d_center, d_context, d_negatives)``.
    """
    pos = context @ center
    neg = negatives @ center
    loss = -_log_sigmoid(pos) - _log_sigmoid(-neg).sum()
    g_pos = _sigmoid(pos) - 1.0
    g_neg = _sigmoid(neg)
    d_center = g_pos * context + g_neg @ negatives
    return float(loss), d_center, g_pos * center, np.outer(g_neg, center)


def _pairs(sentences: list[np.ndarray], window: int) -> np.ndarray:
    out = []
    for sent in sentences:
        n = len(sent)
        for i in range(n):
            for j in range(max(0, i - window), min(n, i + window + 1)):
                if j != i:
                    out.append((sent[i], sent[j]))
    return np.array(out, dtype=np.int64).reshape(-1, 2)


def train_skipgram(
    corpus: Iterable[Sequence[str]],
    config: SkipGramConfig = SkipGramConfig(),
    seed: int = 0,
) -> EmbeddingTable:
    """Skip-gram with negative sampling, trained by SGD over shuffled pair batches.

    Negatives come from the unigram distribution raised to 0.75. The learning
    rate decays linearly over all updates. Updates within a batch are summed with
    ``np.add.at`` so repeated rows accumulate; everything is single-threaded and
    bit-reproducible for a fixed seed.
    """
    corpus = [list(t) for t in corpus]
    vocab = build_vocab(corpus, config.min_count)
    sentences = [np.array([vocab.index[t] for t in toks if t in vocab.index], dtype=np.int64) for toks in corpus]
    pairs = _pairs(sentences, config.window)
    if len(pairs) == 0:
        raise ValueError("corpus yields no (center, context) pairs")

    rng = np.random.default_rng(seed)
    V, d, k = len(vocab), config.dim, config.negatives
    W = (rng.random((V, d)) - 0.5) / d
    C = np.zeros((V, d))
    noise = np.asarray(vocab.counts, dtype=np.float64) ** 0.75
    noise /= noise.sum()
    noise_cdf = np.cumsum(noise)

    total_steps = config.epochs * len(pairs)
    step = 0
    history = []
    for epoch in range(config.epochs):
        order = rng.permutation(len(pairs))
        epoch_loss = 0.0
        for start in range(0, len(order), config.batch_size):
            batch = pairs[order[start:start + config.batch_size]]
            b = len(batch)
            lr = config.learning_rate * max(config.min_lr_fraction, 1.0 - step / total_steps)
            step += b
            centers, contexts = batch[:, 0], batch[:, 1]
            negs = np.minimum(np.searchsorted(noise_cdf, rng.random((b, k)), side="right"), V - 1)

            v = W[centers]  # (b, d)
            u_pos = C[contexts]  # (b, d)
            u_neg = C[negs]  # (b, k, d)
            s_pos = np.einsum("bd,bd->b", u_pos, v)
            s_neg = np.einsum("bkd,bd->bk", u_neg, v)
            epoch_loss -= _log_sigmoid(s_pos).sum() + _log_sigmoid(-s_neg).sum()

            g_pos = _sigmoid(s_pos) - 1.0  # (b,)
            g_neg = _sigmoid(s_neg)  # (b, k)
            d_v = g_pos[:, None] * u_pos + np.einsum("bk,bkd->bd", g_neg, u_neg)
            np.add.at(C, contexts, -lr * g_pos[:, None] * v)
            np.add.at(C, negs.ravel(), (-lr * g_neg[:, :, None] * v[:, None, :]).reshape(-1, d))
            np.add.at(W, centers, -lr * d_v)
        history.append(epoch_loss / len(pairs))
        log.debug("skip-gram epoch %d loss %.5f", epoch + 1, history[-1])
    return EmbeddingTable(vocab, W, C, history)


def query_embedding(tokens: Sequence[str], table: EmbeddingTable) -> np.ndarray:
    """Mean of the in-vocabulary token vectors; zero vector when there are none."""
    idx = [table.vocab.index[t] for t in tokens if t in table.vocab.index]
    if not idx:
        return np.zeros(table.dim)
    return table.vectors[idx].mean(axis=0)


def sequence_embedding(tokens: Sequence[str], table: EmbeddingTable, max_len: int) -> np.ndarray:
    """In-vocabulary token vectors stacked in order, truncated/zero-padded to ``max_len`` rows."""
    if max_len < 1:
        raise ValueError("max_len must be >= 1")
    idx = [table.vocab.index[t] for t in tokens if t in table.vocab.index][:max_len]
    out = np.zeros((max_len, table.dim))
    if idx:
        out[:len(idx)] = table.vectors[idx]
    return out


def featurize(token_lists: Iterable[Sequence[str]], table: EmbeddingTable, kind: str, max_len: int = 16) -> np.ndarray:
    """Stack features for a model kind: mean vectors for ``logistic``, sequences for ``cnn``."""
    if kind == "logistic":
        rows = [query_embedding(t, table) for t in token_lists]
        return np.array(rows).reshape(len(rows), table.dim)
    if kind == "cnn":
        rows = [sequence_embedding(t, table, max_len) for t in token_lists]
        return np.array(rows).reshape(len(rows), max_len, table.dim)
    raise ValueError(f"unknown model kind {kind!r}")
