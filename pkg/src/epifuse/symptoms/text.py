"""Tweet records, tokenisation, retweet removal and keyword filtering."""
from __future__ import annotations

import csv
import json
import re
from dataclasses import dataclass
from datetime import datetime
from importlib import resources
from pathlib import Path
from typing import Iterable, Sequence

from ..errors import DataError

LANGUAGES = ("en", "de", "it", "pt", "es")
_TOKEN = re.compile(r"\w+(?:-\w+)*", re.UNICODE)


@dataclass(frozen=True)
class Tweet:
    text: str
    lang: str = "en"
    lon: float | None = None
    lat: float | None = None
    profile_location: str | None = None
    timestamp: datetime | None = None
    retweeted: bool = False

    @property
    def has_point(self) -> bool:
        return self.lon is not None and self.lat is not None

    @classmethod
    def from_dict(cls, d: dict) -> "Tweet":
        if "text" not in d or not isinstance(d["text"], str):
            raise DataError("tweet record needs a text field")
        ts = d.get("timestamp")
        if ts is not None:
            try:
                ts = datetime.fromisoformat(str(ts).replace("Z", "+00:00"))
            except ValueError:
                raise DataError(f"malformed timestamp {ts!r}") from None
        lon, lat = d.get("lon"), d.get("lat")
        return cls(
            text=d["text"],
            lang=d.get("lang", "en"),
            lon=None if lon is None else float(lon),
            lat=None if lat is None else float(lat),
            profile_location=d.get("profile_location"),
            timestamp=ts,
            retweeted=bool(d.get("retweeted", False) or d.get("retweeted_status")),
        )


def read_tweets(path) -> list[Tweet]:
    """Newline-delimited JSON tweet records; blank lines are skipped."""
    out = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                out.append(Tweet.from_dict(json.loads(line)))
            except (json.JSONDecodeError, DataError, TypeError, ValueError) as exc:
                raise DataError(f"{path}:{lineno}: {exc}") from None
    return out


def tokenize(text: str) -> list[str]:
    return _TOKEN.findall(text.casefold())


@dataclass(frozen=True)
class Lexicon:
    """Symptom keywords for one language plus explicit disease terms that
    never count as evidence of symptoms on their own."""

    terms: frozenset[tuple[str, ...]]
    excluded: frozenset[tuple[str, ...]] = frozenset()

    def __post_init__(self):
        terms = frozenset(self.terms) - frozenset(self.excluded)
        if not terms:
            raise ValueError("lexicon has no usable symptom terms")
        object.__setattr__(self, "terms", terms)
        object.__setattr__(self, "_max_len", max(len(t) for t in terms))

    @classmethod
    def from_words(cls, words: Iterable[str], excluded: Iterable[str] = ()) -> "Lexicon":
        return cls(frozenset(tuple(tokenize(w)) for w in words if tokenize(w)),
                   frozenset(tuple(tokenize(w)) for w in excluded if tokenize(w)))

    @classmethod
    def builtin(cls, lang: str) -> "Lexicon":
        """Illustrative stand-in keyword list shipped with the package."""
        if lang not in LANGUAGES:
            raise ValueError(f"no lexicon for language {lang!r}")
        base = resources.files(__package__) / "data"
        terms = [row["term"] for row in _read_tsv(base / f"symptoms_{lang}.tsv")]
        excluded = [row["term"] for row in _read_tsv(base / "excluded.tsv")
                    if row["lang"] in ("*", lang)]
        return cls.from_words(terms, excluded)

    @classmethod
    def from_tsv(cls, path, excluded_path=None, lang: str | None = None) -> "Lexicon":
        terms = [row["term"] for row in _read_tsv(Path(path))]
        excluded = []
        if excluded_path is not None:
            excluded = [row["term"] for row in _read_tsv(Path(excluded_path))
                        if lang is None or row.get("lang", "*") in ("*", lang)]
        return cls.from_words(terms, excluded)

    def matches(self, tokens: Sequence[str]) -> bool:
        n = len(tokens)
        for i in range(n):
            for k in range(1, min(self._max_len, n - i) + 1):
                if tuple(tokens[i:i + k]) in self.terms:
                    return True
        return False


def _read_tsv(path) -> list[dict[str, str]]:
    with path.open(encoding="utf-8", newline="") as fh:
        return list(csv.DictReader(fh, delimiter="\t"))


def keyword_filter(text: str, lexicon: Lexicon) -> bool:
    """True iff some symptom keyword occurs as a whole token sequence."""
    return lexicon.matches(tokenize(text))


def is_retweet(tweet: Tweet) -> bool:
    return tweet.retweeted or tweet.text.lstrip().startswith("#RT")


def drop_retweets(tweets: Iterable[Tweet]) -> list[Tweet]:
    return [t for t in tweets if not is_retweet(t)]
