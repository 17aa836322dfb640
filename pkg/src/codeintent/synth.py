"""Synthetic query logs with known intent, for desk-scale runs of the pipeline.

Every query starts from a neutral skeleton ("{lang} {action} {topic}") drawn
from its intent's template bank. Trigger phrases from each heuristic family and
filler words that no heuristic looks at are then added independently, at rates
that depend on the intent. Heuristics therefore overlap, conflict and abstain
much as they do on real logs, and the filler words give a text classifier
signal beyond the heuristics themselves.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass
from datetime import datetime, timedelta, timezone
from typing import Mapping, Sequence

import numpy as np

from .text import normalize_query

# bank name -> list of (skeleton template, ground-truth intent)
TEMPLATE_BANKS: dict[str, list[tuple[str, int]]] = {
    "code-search": [
        ("{lang} {topic}", 1),
        ("{lang} {action} {topic}", 1),
        ("{action} {topic} in {lang}", 1),
        ("{action} {topic} to {topic2} {lang}", 1),
        ("{topic} {lang}", 1),
    ],
    "not-code-search": [
        ("{lang} {topic}", 0),
        ("{lang} {topic} {topic2}", 0),
        ("{topic} in {lang}", 0),
        ("{lang}", 0),
        ("{lang} {tool}", 0),
    ],
}
BANK_WEIGHTS = {"code-search": 0.5, "not-code-search": 0.5}

# family -> (phrases, placement, rate given intent 0, rate given intent 1)
CUES: dict[str, tuple[tuple[str, ...], str, float, float]] = {
    "api": (("api", "method", "function call"), "suffix", 0.05, 0.25),
    "debug": (("error", "not working", "exception"), "suffix", 0.30, 0.03),
    "howto": (("how to",), "prefix", 0.10, 0.40),
    "learn": (("tutorial", "what is", "vs {topic2}", "difference"), "prefix", 0.25, 0.04),
    "install": (("download", "install", "update"), "suffix", 0.12, 0.01),
    "code-search": (("example", "sample code", "snippet", "implementation"), "suffix", 0.03, 0.35),
    "non-programming": (("jobs", "interview questions"), "suffix", 0.06, 0.005),
    "error-codes": (("{code}",), "prefix", 0.10, 0.005),
}
# Words no heuristic looks at but that still lean one way.
FILLER = {
    1: ("loop", "syntax", "code", "class", "constructor", "return value", "one liner", "recursion"),
    0: ("salary", "book", "course", "certification", "version history", "logo", "meaning", "pdf"),
}
ZIPF_EXPONENT = 0.5
FILLER_RATE = {1: (0.10, 0.60), 0: (0.60, 0.10)}  # filler class -> (rate given intent 0, given intent 1)

LANG_FORMS = {"csharp": ("c#", "c#", "c#", "c sharp", "csharp"), "java": ("java",)}
TOPICS = (
    "list", "dictionary", "string", "array", "linq query", "stream", "hashmap", "thread",
    "json", "xml", "file", "socket", "regex", "datetime", "lambda", "enum", "interface",
    "generic class", "http request", "async task", "database connection", "queue", "tuple",
    "binary tree", "linked list", "timer", "textbox", "button click", "csv file", "bitmap",
)
ACTIONS = (
    "sort", "parse", "reverse", "serialize", "read", "write", "convert", "iterate over",
    "split", "filter", "merge", "copy", "compare", "encrypt", "compress", "validate",
)
TOOLS = ("visual studio", "jdk", "eclipse", "nuget package", "maven", "intellij", "sdk", "runtime")
CS_CODES = ("cs0246", "cs1061", "cs0103", "cs7038", "cs0029", "cs0120", "cs1002", "cs8600")
JAVA_EXCEPTIONS = (
    "java.lang.nullpointerexception", "java.io.filenotfoundexception",
    "java.util.concurrentmodificationexception", "java.lang.classcastexception",
    "java.io.eofexception", "java.lang.arrayindexoutofboundsexception",
)
MULTI_LANGUAGE = (
    "c# vs java", "java to c# converter", "how hard is c# compared to java or c++?",
    "python vs java", "javascript array example", "c++ vs c# performance",
)
URL_HOSTS = (
    "https://stackoverflow.com/questions/{n}",
    "https://learn.example.com/{lang}/{n}",
    "https://docs.example.org/{lang}/api/{n}",
    "https://www.tutorials.example.net/{lang}-{n}",
    "https://github.com/example/repo{n}",
)


@dataclass
class SyntheticCorpus:
    entries: list[dict]
    truth: dict[str, int]

    def write(self, log_path, truth_path) -> None:
        with open(log_path, "w", encoding="utf-8") as fh:
            for e in self.entries:
                fh.write(json.dumps(e, sort_keys=True) + "\n")
        write_truth(self.truth, truth_path)


def write_truth(truth: Mapping[str, int], path) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, delimiter="\t", lineterminator="\n")
        w.writerow(["query", "label"])
        for q in sorted(truth):
            w.writerow([q, truth[q]])


def read_truth(path) -> dict[str, int]:
    with open(path, encoding="utf-8", newline="") as fh:
        rows = list(csv.reader(fh, delimiter="\t"))
    return {q: int(label) for q, label in rows[1:]}


def _slots(rng, lang: str) -> dict[str, str]:
    topic, topic2 = rng.choice(len(TOPICS), size=2, replace=False)
    return {
        "lang": str(rng.choice(LANG_FORMS[lang])),
        "topic": TOPICS[topic],
        "topic2": TOPICS[topic2],
        "action": str(rng.choice(ACTIONS)),
        "tool": str(rng.choice(TOOLS)),
        "code": str(rng.choice(CS_CODES if lang == "csharp" else JAVA_EXCEPTIONS)),
    }


def _compose(rng, template: str, label: int, lang: str, decorate: bool) -> str:
    slots = _slots(rng, lang)
    prefix, suffix = [], []
    if decorate:
        for family in sorted(CUES):
            phrases, placement, rate0, rate1 = CUES[family]
            if rng.random() < (rate1 if label else rate0):
                phrase = phrases[rng.integers(len(phrases))]
                (prefix if placement == "prefix" else suffix).append(phrase)
        for filler_class in (0, 1):
            if rng.random() < FILLER_RATE[filler_class][label]:
                words = FILLER[filler_class]
                suffix.append(words[rng.integers(len(words))])
        suffix = [suffix[i] for i in rng.permutation(len(suffix))]
    return " ".join([*prefix, template, *suffix]).format(**slots)


def _surface(rng, query: str) -> str:
    """Random casing and spacing noise that normalization must undo."""
    r = rng.random()
    if r < 0.1:
        return query.upper()
    if r < 0.2:
        return "  " + query.replace(" ", "  ") + " "
    if r < 0.3:
        return query.title()
    return query


def generate_synthetic_corpus(
    size: int,
    seed: int,
    banks: Mapping[str, Sequence[tuple[str, int]]] | None = None,
    languages: Sequence[str] = ("csharp", "java"),
    noise: bool = True,
    decorate: bool = True,
) -> SyntheticCorpus:
    """Emit ``size`` raw log entries with a ground-truth intent per distinct query.

    With ``decorate`` off, queries are bare skeletons with no trigger phrases or
    filler. With ``noise`` on, a few percent of entries are bot traffic, foreign-locale,
    multi-language or malformed, so the ingest filters have something to remove.
    """
    if size < 1:
        raise ValueError("size must be >= 1")
    banks = dict(TEMPLATE_BANKS if banks is None else banks)
    rng = np.random.default_rng(seed)
    names = sorted(banks)
    weights = np.array([BANK_WEIGHTS.get(n, 1.0) for n in names])
    weights /= weights.sum()

    # distinct query pool with Zipf-like popularity
    pool: list[str] = []
    truth: dict[str, int] = {}
    pool_target = size
    attempts = 0
    while len(pool) < pool_target and attempts < 50 * pool_target:
        attempts += 1
        name = names[rng.choice(len(names), p=weights)]
        template, label = banks[name][rng.integers(len(banks[name]))]
        lang = languages[rng.integers(len(languages))]
        q = normalize_query(_compose(rng, template, int(label), lang, decorate))
        if q not in truth:
            truth[q] = int(label)
            pool.append(q)
    popularity = 1.0 / np.arange(1, len(pool) + 1) ** ZIPF_EXPONENT
    popularity /= popularity.sum()
    urls = {
        q: [URL_HOSTS[h].format(n=int(rng.integers(10_000, 99_999)), lang="java" if "java" in q else "dotnet")
            for h in rng.choice(len(URL_HOSTS), size=4, replace=False)]
        for q in pool
    }
    n_users = max(10, size // 3)
    start = datetime(2019, 9, 1, tzinfo=timezone.utc)
    span = int(timedelta(days=365).total_seconds())

    entries = []
    for _ in range(size):
        r = rng.random() if noise else 1.0
        ts = (start + timedelta(seconds=int(rng.integers(span)))).strftime("%Y-%m-%dT%H:%M:%SZ")
        user = f"u{int(rng.integers(n_users)):06d}"
        if r < 0.01:
            entries.append({"query": "", "user_id": user, "locale": "en-US", "region": "US"})
            continue
        if r < 0.04:
            q = MULTI_LANGUAGE[rng.integers(len(MULTI_LANGUAGE))]
            entries.append(_entry(q, user, ts, [], "en-US", "US", False))
            continue
        q = pool[rng.choice(len(pool), p=popularity)]
        cand = urls[q]
        n_clicks = int(rng.choice(3, p=[0.3, 0.45, 0.25]))
        clicked = [cand[i] for i in sorted(rng.choice(4, size=n_clicks, replace=False, p=[0.5, 0.25, 0.15, 0.1]))]
        locale, region, bot = "en-US", "US", False
        if r < 0.07:
            bot = True
        elif r < 0.10:
            locale, region = ("fr-FR", "FR") if r < 0.085 else ("en-GB", "GB")
        entries.append(_entry(_surface(rng, q), user, ts, clicked, locale, region, bot))
    return SyntheticCorpus(entries, truth)


def _entry(query, user, ts, clicked, locale, region, bot) -> dict:
    return {
        "query": query,
        "user_id": user,
        "locale": locale,
        "region": region,
        "is_bot": bot,
        "clicked_urls": clicked,
        "timestamp": ts,
    }
