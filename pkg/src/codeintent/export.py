"""The published dataset format: one tab-separated row per query.

Columns are Id, Query, IsCodeSearchQuery, TopClickedUrls, PopularityRank. The
URL field holds up to three comma-delimited URLs; commas, tabs and line breaks
inside a URL are percent-encoded so the field stays parseable.
"""

from __future__ import annotations

import io
from dataclasses import dataclass
from typing import Iterable, Sequence

from .corpus import Corpus, apply_k_anonymity, assign_popularity_ranks, filter_language

HEADER = ("Id", "Query", "IsCodeSearchQuery", "TopClickedUrls", "PopularityRank")

_ESCAPES = {",": "%2C", "\t": "%09", "\n": "%0A", "\r": "%0D"}


class SchemaError(ValueError):
    pass


def encode_url(url: str) -> str:
    return "".join(_ESCAPES.get(c, c) for c in url)


def decode_url(field: str) -> str:
    for char, code in _ESCAPES.items():
        field = field.replace(code, char)
    return field


@dataclass(frozen=True)
class ExportRecord:
    id: int
    query: str
    is_code_search_query: bool
    top_clicked_urls: tuple[str, ...]
    popularity_rank: int

    def __post_init__(self):
        if self.popularity_rank < 1:
            raise SchemaError(f"rank must be >= 1, got {self.popularity_rank}")
        if len(self.top_clicked_urls) > 3:
            raise SchemaError("at most three URLs per query")
        if any(c in self.query for c in "\t\n\r"):
            raise SchemaError("query contains a field or record separator")

    def to_line(self) -> str:
        return "\t".join([
            str(self.id),
            self.query,
            "true" if self.is_code_search_query else "false",
            ",".join(encode_url(u) for u in self.top_clicked_urls),
            str(self.popularity_rank),
        ])

    @classmethod
    def from_line(cls, line: str) -> "ExportRecord":
        cells = line.split("\t")
        if len(cells) != len(HEADER):
            raise SchemaError(f"expected {len(HEADER)} fields, got {len(cells)}: {line!r}")
        qid, query, flag, urls, rank = cells
        if flag not in ("true", "false"):
            raise SchemaError(f"IsCodeSearchQuery must be true/false, got {flag!r}")
        try:
            return cls(int(qid), query, flag == "true",
                       tuple(decode_url(u) for u in urls.split(",")) if urls else (), int(rank))
        except ValueError as exc:
            if isinstance(exc, SchemaError):
                raise
            raise SchemaError(f"bad integer field in {line!r}") from exc


def dumps(records: Iterable[ExportRecord]) -> str:
    buf = io.StringIO()
    buf.write("\t".join(HEADER) + "\n")
    for rec in records:
        buf.write(rec.to_line() + "\n")
    return buf.getvalue()


def loads(text: str) -> list[ExportRecord]:
    """Parse and validate an export; ranks must be unique and dense from 1."""
    lines = text.split("\n")
    if not lines or lines[0] != "\t".join(HEADER):
        raise SchemaError("missing or wrong header")
    if lines[-1] != "":
        raise SchemaError("file must end with a newline")
    records = [ExportRecord.from_line(line) for line in lines[1:-1]]
    ranks = sorted(r.popularity_rank for r in records)
    if ranks != list(range(1, len(records) + 1)):
        raise SchemaError("popularity ranks are not a permutation of 1..N")
    if len({r.id for r in records}) != len(records):
        raise SchemaError("duplicate ids")
    return records


def write_export(records: Sequence[ExportRecord], path) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(dumps(records))


def read_export(path) -> list[ExportRecord]:
    with open(path, encoding="utf-8", newline="") as fh:
        return loads(fh.read())


def export_dataset(corpus: Corpus, classifier, k: int, keyword_sets=None, language=None) -> list[ExportRecord]:
    """Language filter, k-anonymity, popularity ranking, then intent classification.

    Both intent classes are kept; the flag carries the prediction. Rows come out
    in rank order.
    """
    if classifier is None or getattr(classifier, "model", None) is None:
        raise ValueError("export needs a trained classifier")
    if keyword_sets is not None:
        corpus = filter_language(corpus, keyword_sets, language or corpus.language)
    corpus = assign_popularity_ranks(apply_k_anonymity(corpus, k))
    records = sorted(corpus, key=lambda r: r.rank)
    if not records:
        return []
    labels = classifier.predict([r.text for r in records])
    return [
        ExportRecord(r.id, r.text, bool(label), r.top_clicked_urls, r.rank)
        for r, label in zip(records, labels)
    ]
