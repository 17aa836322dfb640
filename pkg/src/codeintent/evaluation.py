"""Accuracy, per-class precision/recall/F1, and Fleiss' kappa."""

from __future__ import annotations

import csv
from dataclasses import asdict, dataclass, field
from typing import Mapping, Sequence

import numpy as np


@dataclass(frozen=True)
class ConfusionCounts:
    tp: int = 0
    fp: int = 0
    fn: int = 0
    tn: int = 0

    @property
    def total(self) -> int:
        return self.tp + self.fp + self.fn + self.tn

    def complement(self) -> "ConfusionCounts":
        """Counts with class 0 taken as the positive class."""
        return ConfusionCounts(tp=self.tn, fp=self.fn, fn=self.fp, tn=self.tp)


def confusion(preds: Sequence[int], golds: Sequence[int]) -> ConfusionCounts:
    p = np.asarray(preds, dtype=np.int64)
    g = np.asarray(golds, dtype=np.int64)
    if p.shape != g.shape:
        raise ValueError(f"length mismatch: {p.size} predictions vs {g.size} gold labels")
    if not (np.isin(p, (0, 1)).all() and np.isin(g, (0, 1)).all()):
        raise ValueError("labels must be 0 or 1")
    return ConfusionCounts(
        tp=int(((p == 1) & (g == 1)).sum()),
        fp=int(((p == 1) & (g == 0)).sum()),
        fn=int(((p == 0) & (g == 1)).sum()),
        tn=int(((p == 0) & (g == 0)).sum()),
    )


@dataclass(frozen=True)
class ClassMetrics:
    precision: float
    recall: float
    f1: float


@dataclass
class EvalReport:
    accuracy: float
    code: ClassMetrics
    not_code: ClassMetrics
    n: int
    prevalence: float | None = None
    counts: ConfusionCounts | None = None
    undefined: list[str] = field(default_factory=list)

    def to_dict(self) -> dict:
        return asdict(self)


def _ratio(num: int, den: int, name: str, undefined: list[str]) -> float:
    if den == 0:
        undefined.append(name)
        return 0.0
    return num / den


def _class_metrics(c: ConfusionCounts, label: str, undefined: list[str]) -> ClassMetrics:
    p = _ratio(c.tp, c.tp + c.fp, f"{label}.precision", undefined)
    r = _ratio(c.tp, c.tp + c.fn, f"{label}.recall", undefined)
    f1 = 0.0 if p + r == 0 else 2 * p * r / (p + r)
    return ClassMetrics(p, r, f1)


def metrics(counts: ConfusionCounts) -> EvalReport:
    """Accuracy plus precision/recall/F1 for both classes; 0/0 ratios are 0 and flagged."""
    if counts.total == 0:
        raise ValueError("cannot compute metrics over zero examples")
    undefined: list[str] = []
    return EvalReport(
        accuracy=(counts.tp + counts.tn) / counts.total,
        code=_class_metrics(counts, "code", undefined),
        not_code=_class_metrics(counts.complement(), "not_code", undefined),
        n=counts.total,
        counts=counts,
        undefined=undefined,
    )


def evaluate_model(predictions: Mapping[int, int], gold: Mapping[int, int]) -> EvalReport:
    """Score predictions against gold labels, both keyed by query id."""
    if not gold:
        raise ValueError("gold set is empty")
    if set(predictions) != set(gold):
        missing = sorted(set(gold) - set(predictions))[:5]
        extra = sorted(set(predictions) - set(gold))[:5]
        raise ValueError(f"id mismatch (missing {missing}, unexpected {extra})")
    ids = sorted(gold)
    g = [gold[i] for i in ids]
    report = metrics(confusion([predictions[i] for i in ids], g))
    report.prevalence = float(np.mean(g))
    return report


def fleiss_kappa(table) -> float:
    """Fleiss' kappa for an items x categories matrix of rating counts."""
    counts = np.asarray(table, dtype=np.float64)
    if counts.ndim != 2 or counts.shape[0] < 1:
        raise ValueError("ratings table must be a non-empty 2-d array")
    if (counts < 0).any():
        raise ValueError("rating counts must be non-negative")
    raters = counts.sum(axis=1)
    n = raters[0]
    if not np.all(raters == n):
        raise ValueError("every item needs the same number of ratings")
    if n < 2:
        raise ValueError("at least two raters are required")
    N = counts.shape[0]
    p_items = (counts * (counts - 1)).sum(axis=1) / (n * (n - 1))
    p_bar = p_items.mean()
    p_cat = counts.sum(axis=0) / (N * n)
    p_e = float((p_cat ** 2).sum())
    if np.isclose(p_e, 1.0, rtol=0, atol=1e-15):
        raise ValueError("kappa is undefined when every rating falls in one category")
    return float((p_bar - p_e) / (1.0 - p_e))


def ratings_table(annotations: Sequence[Sequence[int]], categories: Sequence[int] = (0, 1)) -> np.ndarray:
    """Per-annotator labels (items x raters) to per-category counts (items x categories)."""
    a = np.asarray(annotations, dtype=np.int64)
    return np.stack([(a == c).sum(axis=1) for c in categories], axis=1)


def majority_gold(annotations: Sequence[Sequence[int]]) -> list[int]:
    a = np.asarray(annotations, dtype=np.int64)
    if a.ndim != 2:
        raise ValueError("annotations must be items x annotators")
    ones = (a == 1).sum(axis=1)
    zeros = (a == 0).sum(axis=1)
    if (ones == zeros).any():
        raise ValueError("tied annotator vote; use an odd number of annotators")
    return [int(x) for x in ones > zeros]


@dataclass
class GoldSet:
    ids: list[int]
    queries: list[str]
    labels: list[int]
    annotations: np.ndarray | None = None

    def __len__(self):
        return len(self.ids)

    def kappa(self) -> float | None:
        if self.annotations is None or self.annotations.shape[1] < 2:
            return None
        return fleiss_kappa(ratings_table(self.annotations))

    def save(self, path) -> None:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            w = csv.writer(fh, delimiter="\t", lineterminator="\n")
            if self.annotations is None:
                w.writerow(["id", "query", "label"])
                w.writerows(zip(self.ids, self.queries, self.labels))
            else:
                k = self.annotations.shape[1]
                w.writerow(["id", "query", *[f"annotator_{i + 1}" for i in range(k)]])
                for qid, q, row in zip(self.ids, self.queries, self.annotations):
                    w.writerow([qid, q, *row.tolist()])


def load_gold(path) -> GoldSet:
    """Read ``id, query, label`` or ``id, query, a1, a2, a3`` tab-separated rows."""
    with open(path, encoding="utf-8", newline="") as fh:
        rows = [r for r in csv.reader(fh, delimiter="\t") if r]
    if rows and not rows[0][0].strip().lstrip("-").isdigit():
        rows = rows[1:]
    ids = [int(r[0]) for r in rows]
    queries = [r[1] for r in rows]
    votes = np.array([[int(x) for x in r[2:]] for r in rows], dtype=np.int64).reshape(len(rows), -1)
    if votes.shape[1] == 1:
        return GoldSet(ids, queries, votes[:, 0].tolist())
    return GoldSet(ids, queries, majority_gold(votes), votes)


COLUMNS = ("Accuracy", "P", "R", "F1", "P", "R", "F1")


def format_reports(rows: Sequence[tuple[str, EvalReport]], title: str = "") -> str:
    """Plain-text table with the accuracy / code / not-code column layout, in percent."""
    name_w = max([len("Model"), *(len(n) for n, _ in rows)]) + 2
    head1 = f"{'':<{name_w}}{'':>9}  {'Code Intent':^23}  {'Not Code Intent':^23}"
    head2 = f"{'Model':<{name_w}}{'Accuracy':>9}  " + "".join(f"{c:>8}" for c in COLUMNS[1:4]) \
        + "  " + "".join(f"{c:>8}" for c in COLUMNS[4:])
    lines = [title] if title else []
    lines += [head1, head2, "-" * len(head2)]
    for name, r in rows:
        vals = [r.code.precision, r.code.recall, r.code.f1, r.not_code.precision, r.not_code.recall, r.not_code.f1]
        cells = [f"{100 * v:8.1f}" for v in vals]
        lines.append(f"{name:<{name_w}}{100 * r.accuracy:9.1f}  " + "".join(cells[:3]) + "  " + "".join(cells[3:]))
    return "\n".join(lines)
