"""Combining learning-function votes into training labels.

Two combiners are provided: a majority vote with seeded coin-flip ties, and a
generative model in which every LF draws its output from a class-conditional
categorical distribution over {abstain, 0, 1}, independently given the true
class. The generative model is fitted by EM on the label matrix alone.

Emission tables are indexed ``[lf, true_class, output + 1]`` so that column 0
holds the abstain probability, column 1 the vote-0 probability and column 2
the vote-1 probability.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .labeling import ABSTAIN, LabelMatrix

log = logging.getLogger(__name__)

SMOOTHING = 0.01
INIT_CONFIDENCE = 0.7
PI_FLOOR = 1e-6


class DegenerateModelError(ValueError):
    pass


@dataclass
class LabelModelParams:
    pi: float
    emissions: np.ndarray  # (n_lfs, 2, 3)
    n_iter: int = 0
    log_likelihood: float | None = None
    history: list[float] = field(default_factory=list, repr=False)

    def __post_init__(self):
        self.emissions = np.asarray(self.emissions, dtype=np.float64)
        self.validate()

    @property
    def n_lfs(self) -> int:
        return self.emissions.shape[0]

    def validate(self) -> None:
        e = self.emissions
        if e.ndim != 3 or e.shape[1:] != (2, 3):
            raise ValueError(f"emissions must have shape (n, 2, 3), got {e.shape}")
        if not 0.0 < self.pi < 1.0:
            raise ValueError(f"pi must lie in (0, 1), got {self.pi}")
        if (e < 0).any() or not np.allclose(e.sum(axis=2), 1.0, atol=1e-9, rtol=0):
            raise ValueError("each emission distribution must be non-negative and sum to 1")

    def swapped(self) -> "LabelModelParams":
        """The same model with the two class labels exchanged."""
        return LabelModelParams(
            1.0 - self.pi, self.emissions[:, ::-1, :].copy(),
            self.n_iter, self.log_likelihood, list(self.history),
        )

    def to_dict(self) -> dict:
        return {
            "pi": self.pi,
            "emissions": [
                {"class_0": list(map(float, e[0])), "class_1": list(map(float, e[1]))}
                for e in self.emissions
            ],
            "outputs": [-1, 0, 1],
            "n_iter": self.n_iter,
            "log_likelihood": self.log_likelihood,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "LabelModelParams":
        em = np.array([[e["class_0"], e["class_1"]] for e in d["emissions"]])
        return cls(d["pi"], em, d.get("n_iter", 0), d.get("log_likelihood"))

    def save(self, path, lf_names: Sequence[str] | None = None) -> None:
        d = self.to_dict()
        if lf_names is not None:
            d["lf_names"] = list(lf_names)
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(d, fh, indent=2, sort_keys=True)
            fh.write("\n")

    @classmethod
    def load(cls, path) -> "LabelModelParams":
        with open(path, encoding="utf-8") as fh:
            return cls.from_dict(json.load(fh))


def _values(matrix) -> np.ndarray:
    return np.asarray(matrix.values if isinstance(matrix, LabelMatrix) else matrix, dtype=np.int64)


def majority_vote(matrix, seed: int) -> np.ndarray:
    """Hard labels by counting non-abstain votes; ties (and silence) go to a fair coin."""
    L = _values(matrix)
    ones = (L == 1).sum(axis=1)
    zeros = (L == 0).sum(axis=1)
    coin = np.random.default_rng(seed).integers(0, 2, size=L.shape[0])
    return np.where(ones > zeros, 1, np.where(zeros > ones, 0, coin)).astype(np.int64)


def _joint_log(params: LabelModelParams, L: np.ndarray) -> np.ndarray:
    """log(pi_y * prod_j theta_j[y][l_ij]) for every row and class, shape (m, 2)."""
    n = params.n_lfs
    if L.shape[1] != n:
        raise ValueError(f"matrix has {L.shape[1]} columns, model has {n} LFs")
    with np.errstate(divide="ignore"):
        log_em = np.log(params.emissions)
        prior = np.log([1.0 - params.pi, params.pi])
    cols = np.arange(n)[None, :]
    idx = L + 1
    out = np.empty((L.shape[0], 2))
    for y in (0, 1):
        out[:, y] = prior[y] + log_em[cols, y, idx].sum(axis=1)
    return out


def _normalize(joint: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    top = joint.max(axis=1, keepdims=True)
    if np.isneginf(top).any():
        raise DegenerateModelError("a row has zero probability under both classes")
    w = np.exp(joint - top)
    total = w.sum(axis=1, keepdims=True)
    return w / total, top[:, 0] + np.log(total[:, 0])


def posteriors(params: LabelModelParams, matrix) -> np.ndarray:
    """Per-row class posteriors, shape (m, 2), columns (P(y=0), P(y=1))."""
    probs, _ = _normalize(_joint_log(params, _values(matrix)))
    return probs


def posterior(params: LabelModelParams, row: Sequence[int]) -> tuple[float, float]:
    p = posteriors(params, np.asarray(row, dtype=np.int64)[None, :])[0]
    return float(p[0]), float(p[1])


def log_likelihood(params: LabelModelParams, matrix, smoothing: float = 0.0) -> float:
    """Marginal log-likelihood of the matrix.

    With ``smoothing > 0`` the Dirichlet log-prior implied by that pseudo-count,
    ``smoothing * sum(log theta)``, is added; that penalized objective is the one
    EM with smoothed M-steps provably never decreases.
    """
    L = _values(matrix)
    joint = _joint_log(params, L)
    top = joint.max(axis=1)
    with np.errstate(invalid="ignore"):
        ll = top + np.log(np.exp(joint - top[:, None]).sum(axis=1))
    total = float(ll.sum())
    if smoothing:
        total += smoothing * float(np.log(params.emissions).sum())
    return total


def _m_step(L: np.ndarray, q: np.ndarray, smoothing: float) -> LabelModelParams:
    m, n = L.shape
    counts = np.empty((n, 2, 3))
    for v in range(3):
        hit = (L == v - 1).astype(np.float64)  # (m, n)
        counts[:, :, v] = hit.T @ q  # (n, 2), fixed reduction order
    emissions = (counts + smoothing) / (q.sum(axis=0)[None, :, None] + 3 * smoothing)
    pi = float(np.clip(q[:, 1].mean(), PI_FLOOR, 1.0 - PI_FLOOR))
    return LabelModelParams(pi, emissions)


def infer_polarity(matrix) -> np.ndarray:
    """Each LF's predominant non-abstain output (ties to 1)."""
    L = _values(matrix)
    return np.where((L == 0).sum(axis=0) > (L == 1).sum(axis=0), 0, 1)


def _anchor(params: LabelModelParams, polarity: np.ndarray) -> LabelModelParams:
    """Swap classes if most LFs would otherwise vote against their own class."""
    j = np.arange(params.n_lfs)
    e = polarity + 1
    agree = params.emissions[j, polarity, e] >= params.emissions[j, 1 - polarity, e]
    if agree.sum() < params.n_lfs / 2:
        log.info("anchoring: swapping classes (%d of %d LFs agreed)", agree.sum(), params.n_lfs)
        return params.swapped()
    return params


def fit_em(
    matrix,
    emit_labels: Sequence[int] | None = None,
    max_iter: int = 100,
    tol: float = 1e-6,
    smoothing: float = SMOOTHING,
    init_confidence: float = INIT_CONFIDENCE,
    seed: int = 0,
) -> LabelModelParams:
    """Fit the generative label model by EM.

    Responsibilities are initialized from the seeded majority vote, putting
    ``init_confidence`` on the voted class. ``emit_labels`` gives the class each
    LF votes for, used to resolve the label-switching symmetry at the end; when
    omitted it is read off the matrix.
    """
    L = _values(matrix)
    if L.ndim != 2 or L.shape[0] < 1 or L.shape[1] < 1:
        raise ValueError("label matrix must have at least one row and one column")
    if (L == ABSTAIN).all():
        raise DegenerateModelError("every LF abstains on every row; parameters are unidentifiable")

    votes = majority_vote(L, seed)
    q = np.where(votes[:, None] == np.arange(2)[None, :], init_confidence, 1.0 - init_confidence)
    params = _m_step(L, q, smoothing)
    history = [log_likelihood(params, L, smoothing)]
    n_iter = 0
    for n_iter in range(1, max_iter + 1):
        q, _ = _normalize(_joint_log(params, L))
        params = _m_step(L, q, smoothing)
        history.append(log_likelihood(params, L, smoothing))
        if abs(history[-1] - history[-2]) < tol:
            break

    polarity = infer_polarity(L) if emit_labels is None else np.asarray(emit_labels, dtype=np.int64)
    params = _anchor(params, polarity)
    params.n_iter = n_iter
    params.history = history
    params.log_likelihood = log_likelihood(params, L)
    return params


def assign_labels(probs: np.ndarray, mode: str = "soft") -> np.ndarray:
    """Training targets from posteriors: P(y=1) in soft mode, argmax in hard mode.

    Hard-mode ties go to class 1.
    """
    probs = np.asarray(probs, dtype=np.float64)
    if mode == "soft":
        return probs[:, 1].copy()
    if mode == "hard":
        return (probs[:, 1] >= probs[:, 0]).astype(np.int64)
    raise ValueError(f"unknown label mode {mode!r}")


def sample_synthetic(params: LabelModelParams, m: int, seed: int) -> tuple[LabelMatrix, np.ndarray]:
    """Draw a label matrix and its true labels from the generative model."""
    rng = np.random.default_rng(seed)
    y = (rng.random(m) < params.pi).astype(np.int64)
    u = rng.random((m, params.n_lfs))
    cdf = np.cumsum(params.emissions, axis=2)[np.arange(params.n_lfs)[None, :], y[:, None]]  # (m, n, 3)
    out = (u[:, :, None] >= cdf[:, :, :2]).sum(axis=2) - 1
    names = [f"lf_{j}" for j in range(params.n_lfs)]
    return LabelMatrix(out, names, list(range(m))), y
