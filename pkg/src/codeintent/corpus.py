"""Query-log ingestion, language filtering, anonymity filtering and ranking."""

from __future__ import annotations

import dataclasses
import json
import logging
from collections import Counter, defaultdict
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Iterable, Mapping

import numpy as np

from .text import contains_phrase, normalize_query, tokenize

log = logging.getLogger(__name__)

MAX_URLS = 3


class ConfigError(ValueError):
    """Invalid filter or pipeline configuration."""


class Language(str, Enum):
    CSHARP = "csharp"
    JAVA = "java"

    @classmethod
    def parse(cls, value: "str | Language") -> "Language":
        try:
            return cls(str(getattr(value, "value", value)).lower())
        except ValueError:
            raise ConfigError(f"unknown language {value!r}") from None


DEFAULT_KEYWORDS: dict[Language, tuple[str, ...]] = {
    Language.CSHARP: ("c#", "c sharp", "csharp"),
    Language.JAVA: ("java",),
}

# Mentions of any of these disqualify a query from every target language.
DEFAULT_EXCLUSIONS: tuple[str, ...] = (
    "c++", "cpp", "python", "javascript", "js", "typescript", "php", "ruby",
    "golang", "kotlin", "scala", "swift", "vb.net", "visual basic", "perl",
    "rust", "c language",
)


@dataclass(frozen=True)
class LanguageKeywordSet:
    language: str
    patterns: tuple[str, ...]

    def __post_init__(self):
        if not self.patterns:
            raise ConfigError(f"keyword set for {self.language} is empty")
        object.__setattr__(self, "patterns", tuple(p.lower() for p in self.patterns))

    def matches(self, text: str) -> bool:
        return contains_phrase(text, self.patterns)


def default_keyword_sets() -> list[LanguageKeywordSet]:
    sets = [LanguageKeywordSet(lang.value, pats) for lang, pats in DEFAULT_KEYWORDS.items()]
    sets.append(LanguageKeywordSet("other", DEFAULT_EXCLUSIONS))
    return sets


@dataclass(frozen=True)
class RawLogEntry:
    query: str
    user_id: str
    locale: str
    region: str
    is_bot: bool
    clicked_urls: tuple[str, ...] = ()
    timestamp: str = ""

    @classmethod
    def from_dict(cls, d: Mapping[str, Any]) -> "RawLogEntry":
        """Validate one parsed log line; raises ``ValueError`` when malformed."""
        query = d["query"]
        if not isinstance(query, str) or not query.strip():
            raise ValueError("empty query")
        urls = d.get("clicked_urls") or []
        if not isinstance(urls, list) or not all(isinstance(u, str) for u in urls):
            raise ValueError("clicked_urls must be a list of strings")
        is_bot = d["is_bot"]
        if not isinstance(is_bot, bool):
            raise ValueError("is_bot must be boolean")
        return cls(
            query=query,
            user_id=str(d["user_id"]),
            locale=str(d["locale"]),
            region=str(d["region"]),
            is_bot=is_bot,
            clicked_urls=tuple(urls),
            timestamp=str(d.get("timestamp", "")),
        )

    def to_dict(self) -> dict:
        d = dataclasses.asdict(self)
        d["clicked_urls"] = list(self.clicked_urls)
        return d


@dataclass(frozen=True)
class QueryRecord:
    id: int
    text: str
    frequency: int
    distinct_users: int
    top_clicked_urls: tuple[str, ...]
    language: str
    rank: int | None = None

    def to_dict(self) -> dict:
        d = dataclasses.asdict(self)
        d["top_clicked_urls"] = list(self.top_clicked_urls)
        return d

    @classmethod
    def from_dict(cls, d: Mapping[str, Any]) -> "QueryRecord":
        return cls(
            id=int(d["id"]),
            text=d["text"],
            frequency=int(d["frequency"]),
            distinct_users=int(d["distinct_users"]),
            top_clicked_urls=tuple(d["top_clicked_urls"]),
            language=d["language"],
            rank=d.get("rank"),
        )


@dataclass
class Corpus:
    records: list[QueryRecord]
    language: str
    rejected: int = 0

    def __post_init__(self):
        texts = [r.text for r in self.records]
        if len(set(texts)) != len(texts):
            raise ValueError("duplicate query text in corpus")

    def __len__(self):
        return len(self.records)

    def __iter__(self):
        return iter(self.records)

    def __getitem__(self, i):
        return self.records[i]

    def replace(self, records: list[QueryRecord]) -> "Corpus":
        return Corpus(records, self.language, self.rejected)

    def save(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            header = {"language": self.language, "rejected": self.rejected}
            fh.write(json.dumps(header, sort_keys=True) + "\n")
            for rec in self.records:
                fh.write(json.dumps(rec.to_dict(), sort_keys=True) + "\n")

    @classmethod
    def load(cls, path) -> "Corpus":
        with open(path, encoding="utf-8") as fh:
            header = json.loads(fh.readline())
            records = [QueryRecord.from_dict(json.loads(line)) for line in fh if line.strip()]
        return cls(records, header["language"], header.get("rejected", 0))


@dataclass(frozen=True)
class IngestConfig:
    language: str = Language.CSHARP.value
    locale: str = "en-US"
    region: str = "US"

    def __post_init__(self):
        object.__setattr__(self, "language", Language.parse(self.language).value)


def read_log(path) -> Iterable[Mapping[str, Any] | None]:
    """Yield parsed log lines; unparseable lines come through as ``None``."""
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            if not line.strip():
                continue
            try:
                yield json.loads(line)
            except json.JSONDecodeError:
                yield None


def ingest(entries: Iterable[RawLogEntry | Mapping[str, Any] | None], config: IngestConfig) -> Corpus:
    """Filter and aggregate raw log entries into a corpus.

    Malformed entries are skipped and counted in ``Corpus.rejected``. Record ids
    follow the lexicographic order of the normalized texts, so the result does
    not depend on the order of the stream.
    """
    rejected = 0
    freq: Counter[str] = Counter()
    users: dict[str, set[str]] = defaultdict(set)
    clicks: dict[str, Counter[str]] = defaultdict(Counter)
    locale = config.locale.lower()
    region = config.region.upper()

    for raw in entries:
        try:
            entry = raw if isinstance(raw, RawLogEntry) else RawLogEntry.from_dict(raw)
        except (KeyError, TypeError, ValueError):
            rejected += 1
            continue
        if entry.is_bot or entry.locale.lower() != locale or entry.region.upper() != region:
            continue
        text = normalize_query(entry.query)
        freq[text] += 1
        users[text].add(entry.user_id)
        clicks[text].update(entry.clicked_urls)

    records = []
    for i, text in enumerate(sorted(freq), start=1):
        ranked_urls = sorted(clicks[text].items(), key=lambda kv: (-kv[1], kv[0]))
        records.append(QueryRecord(
            id=i,
            text=text,
            frequency=freq[text],
            distinct_users=len(users[text]),
            top_clicked_urls=tuple(u for u, _ in ranked_urls[:MAX_URLS]),
            language=config.language,
        ))
    if rejected:
        log.warning("ingest rejected %d malformed entries", rejected)
    return Corpus(records, config.language, rejected)


def filter_language(
    corpus: Corpus,
    sets: Iterable[LanguageKeywordSet],
    target: str | Language,
) -> Corpus:
    """Keep queries that mention the target language and no other one."""
    target = Language.parse(target).value
    sets = list(sets)
    own = [s for s in sets if s.language == target]
    if not own:
        raise ConfigError(f"no keyword set for target language {target!r}")
    others = [s for s in sets if s.language != target]
    kept = [
        dataclasses.replace(r, language=target)
        for r in corpus
        if any(s.matches(r.text) for s in own) and not any(s.matches(r.text) for s in others)
    ]
    return Corpus(kept, target, corpus.rejected)


def apply_k_anonymity(corpus: Corpus, k: int) -> Corpus:
    """Drop queries entered by fewer than ``k`` distinct users."""
    if not isinstance(k, (int, np.integer)) or k < 1:
        raise ConfigError(f"k must be a positive integer, got {k!r}")
    return corpus.replace([r for r in corpus if r.distinct_users >= k])


def assign_popularity_ranks(corpus: Corpus) -> Corpus:
    order = sorted(corpus, key=lambda r: (-r.frequency, r.text))
    ranks = {r.text: i for i, r in enumerate(order, start=1)}
    return corpus.replace([dataclasses.replace(r, rank=ranks[r.text]) for r in corpus])


def query_length(text: str) -> int:
    return len(tokenize(text))


def sample_by_length(corpus: Corpus, size: int, seed: int) -> list[QueryRecord]:
    """Draw ``size`` records spread as evenly as possible over token-length strata.

    Quotas are handed out one at a time, cycling from the shortest stratum up
    and skipping strata that are exhausted. Within a stratum the draw is a
    seeded uniform sample without replacement.
    """
    if size > len(corpus):
        raise ValueError(f"cannot sample {size} from a corpus of {len(corpus)}")
    if size < 0:
        raise ValueError("size must be non-negative")
    strata: dict[int, list[QueryRecord]] = defaultdict(list)
    for rec in sorted(corpus, key=lambda r: r.id):
        strata[query_length(rec.text)].append(rec)
    lengths = sorted(strata)
    quota = dict.fromkeys(lengths, 0)
    remaining = size
    while remaining:
        for n in lengths:
            if remaining and quota[n] < len(strata[n]):
                quota[n] += 1
                remaining -= 1

    rng = np.random.default_rng(seed)
    out: list[QueryRecord] = []
    for n in lengths:
        members = strata[n]
        picks = rng.choice(len(members), size=quota[n], replace=False)
        out.extend(members[i] for i in sorted(picks))
    return sorted(out, key=lambda r: r.id)
