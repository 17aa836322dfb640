"""Shared text handling: query normalization, tokenization, keyword matching."""

from __future__ import annotations

import itertools
import re
from functools import lru_cache
from importlib import resources
from typing import Iterable


def normalize_query(text: str) -> str:
    """Lowercase, strip, and collapse internal whitespace runs to one space."""
    return " ".join(text.lower().split())


def tokenize(text: str) -> list[str]:
    """Split on every non-alphanumeric character and lowercase the pieces.

    >>> tokenize("java.io.eofexception: postman")
    ['java', 'io', 'eofexception', 'postman']
    """
    return [
        "".join(chars).lower()
        for is_alnum, chars in itertools.groupby(text, key=str.isalnum)
        if is_alnum
    ]


def remove_stopwords(tokens: Iterable[str], stopwords: Iterable[str]) -> list[str]:
    stop = stopwords if isinstance(stopwords, (set, frozenset)) else set(stopwords)
    return [t for t in tokens if t not in stop]


@lru_cache(maxsize=1)
def default_stopwords() -> frozenset[str]:
    raw = resources.files("codeintent.data").joinpath("stopwords.txt").read_text("utf-8")
    return frozenset(line.strip() for line in raw.splitlines() if line.strip() and not line.startswith("#"))


def load_stopwords(path) -> frozenset[str]:
    with open(path, encoding="utf-8") as fh:
        return frozenset(
            line.strip().lower() for line in fh if line.strip() and not line.startswith("#")
        )


# Neighbours must be non-alphanumeric; text start/end count as boundaries.
_BEFORE = r"(?<![^\W_])"
_AFTER = r"(?![^\W_])"


def phrase_regex(phrase: str) -> str:
    """Regex source matching ``phrase`` only at alphanumeric boundaries.

    Inner whitespace in the phrase matches exactly one space, since queries are
    normalized before matching.
    """
    words = phrase.lower().split()
    body = " ".join(re.escape(w) for w in words)
    return f"{_BEFORE}{body}{_AFTER}"


@lru_cache(maxsize=4096)
def compile_phrases(phrases: tuple[str, ...]) -> re.Pattern | None:
    if not phrases:
        return None
    return re.compile("|".join(f"(?:{phrase_regex(p)})" for p in phrases))


def contains_phrase(text: str, phrases: Iterable[str]) -> bool:
    pattern = compile_phrases(tuple(phrases))
    return pattern is not None and pattern.search(text) is not None
