"""Learning functions and the label matrix they produce."""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field
from importlib import resources
from typing import Iterable, Sequence

import numpy as np

from .text import compile_phrases, normalize_query

ABSTAIN = -1
NEGATIVE = 0
POSITIVE = 1
LABELS = (ABSTAIN, NEGATIVE, POSITIVE)


class LFCompileError(ValueError):
    pass


@dataclass(frozen=True)
class LearningFunctionSpec:
    name: str
    emit_label: int
    keywords: tuple[str, ...] = ()
    regexes: tuple[str, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "keywords", tuple(k.lower() for k in self.keywords))
        object.__setattr__(self, "regexes", tuple(self.regexes))
        if self.emit_label not in (NEGATIVE, POSITIVE):
            raise ValueError(f"{self.name}: emit_label must be 0 or 1, got {self.emit_label!r}")
        if not self.keywords and not self.regexes:
            raise ValueError(f"{self.name}: needs at least one keyword or regex")

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "emit_label": self.emit_label,
            "keywords": list(self.keywords),
            "regexes": list(self.regexes),
        }


@dataclass(frozen=True)
class LearningFunction:
    """A compiled learning function: votes ``emit_label`` when triggered, else abstains."""

    spec: LearningFunctionSpec
    _keywords: re.Pattern | None = field(repr=False, compare=False)
    _regexes: tuple[re.Pattern, ...] = field(repr=False, compare=False)

    @property
    def name(self) -> str:
        return self.spec.name

    @property
    def emit_label(self) -> int:
        return self.spec.emit_label

    def triggers(self, query: str) -> bool:
        if self._keywords is not None and self._keywords.search(query):
            return True
        return any(rx.search(query) for rx in self._regexes)

    def __call__(self, query: str) -> int:
        return self.spec.emit_label if self.triggers(query) else ABSTAIN


def compile_lf(spec: LearningFunctionSpec) -> LearningFunction:
    regexes = []
    for pattern in spec.regexes:
        try:
            regexes.append(re.compile(pattern))
        except re.error as exc:
            raise LFCompileError(f"learning function {spec.name!r}: bad regex {pattern!r}: {exc}") from exc
    return LearningFunction(spec, compile_phrases(spec.keywords), tuple(regexes))


def apply_lf(lf: LearningFunction, query: str) -> int:
    return lf(query)


def parse_lf_specs(entries: Iterable[dict]) -> list[LearningFunctionSpec]:
    return [
        LearningFunctionSpec(
            name=e["name"],
            emit_label=int(e["emit_label"]),
            keywords=tuple(e.get("keywords", ())),
            regexes=tuple(e.get("regexes", ())),
        )
        for e in entries
    ]


def load_lf_specs(path=None) -> list[LearningFunctionSpec]:
    """Read an LF config file; ``None`` loads the bundled default set."""
    if path is None:
        raw = resources.files("codeintent.data").joinpath("learning_functions.json").read_text("utf-8")
    else:
        with open(path, encoding="utf-8") as fh:
            raw = fh.read()
    return parse_lf_specs(json.loads(raw))


def default_lfs() -> list[LearningFunction]:
    return [compile_lf(s) for s in load_lf_specs()]


@dataclass
class LabelMatrix:
    values: np.ndarray
    lf_names: list[str]
    query_ids: list[int]

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.int8)
        if self.values.ndim != 2:
            raise ValueError("label matrix must be 2-d")
        m, n = self.values.shape
        if len(self.lf_names) != n or len(self.query_ids) != m:
            raise ValueError(f"label matrix shape {self.values.shape} does not match names/ids")
        if not np.isin(self.values, LABELS).all():
            raise ValueError("label matrix cells must be in {-1, 0, 1}")

    @property
    def shape(self) -> tuple[int, int]:
        return self.values.shape

    def take(self, rows) -> "LabelMatrix":
        rows = list(rows)
        return LabelMatrix(self.values[rows], list(self.lf_names), [self.query_ids[i] for i in rows])

    def save(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write("\t".join(["id", *self.lf_names]) + "\n")
            for qid, row in zip(self.query_ids, self.values):
                fh.write("\t".join([str(qid), *map(str, row.tolist())]) + "\n")

    @classmethod
    def load(cls, path) -> "LabelMatrix":
        with open(path, encoding="utf-8") as fh:
            header = fh.readline().rstrip("\n").split("\t")
            ids, rows = [], []
            for line in fh:
                if not line.strip():
                    continue
                cells = line.rstrip("\n").split("\t")
                ids.append(int(cells[0]))
                rows.append([int(c) for c in cells[1:]])
        values = np.array(rows, dtype=np.int8).reshape(len(rows), len(header) - 1)
        return cls(values, header[1:], ids)


def build_label_matrix(corpus, lfs: Sequence[LearningFunction]) -> LabelMatrix:
    """Apply every LF to every query. ``corpus`` is a Corpus or (id, text) pairs."""
    if not lfs:
        raise ValueError("at least one learning function is required")
    items = [(r.id, r.text) if hasattr(r, "text") else r for r in corpus]
    if not items:
        raise ValueError("corpus is empty")
    values = np.array(
        [[lf(normalize_query(text)) for lf in lfs] for _, text in items],
        dtype=np.int8,
    )
    return LabelMatrix(values, [lf.name for lf in lfs], [qid for qid, _ in items])


@dataclass
class LFDiagnostics:
    lf_names: list[str]
    coverage: np.ndarray
    overlap: np.ndarray
    conflict: np.ndarray

    def summary(self) -> str:
        lines = [f"{'lf':<18}{'coverage':>10}{'max overlap':>13}{'max conflict':>14}"]
        n = len(self.lf_names)
        for j, name in enumerate(self.lf_names):
            others = [k for k in range(n) if k != j]
            ov = self.overlap[j, others].max() if others else 0.0
            cf = self.conflict[j, others].max() if others else 0.0
            lines.append(f"{name:<18}{self.coverage[j]:>10.3f}{ov:>13.3f}{cf:>14.3f}")
        return "\n".join(lines)


def lf_diagnostics(matrix: LabelMatrix) -> LFDiagnostics:
    L = matrix.values.astype(np.int64)
    m = L.shape[0]
    if m < 1:
        raise ValueError("diagnostics need at least one row")
    active = (L != ABSTAIN).astype(np.float64)
    both = active.T @ active
    pos = (L == POSITIVE).astype(np.float64)
    neg = (L == NEGATIVE).astype(np.float64)
    disagree = pos.T @ neg + neg.T @ pos
    return LFDiagnostics(
        lf_names=list(matrix.lf_names),
        coverage=active.mean(axis=0),
        overlap=both / m,
        conflict=disagree / m,
    )
