"""Loading, validating and calendar-aligning surveillance feeds.

Every loader returns :class:`FeedRecord` objects keyed by region id. Days a
feed does not cover are *missing*, never zero: :func:`align` projects each
feed onto the model calendar ``[epoch, analysis_end]`` and the likelihood
skips the gaps.
"""
from __future__ import annotations

import csv
import json
import logging
import math
from dataclasses import dataclass, field, replace
from datetime import date, datetime
from pathlib import Path
from typing import Iterable, Mapping

import numpy as np

from .errors import ConfigError, DataError
from .inference.model import DEATHS, DataBundle
from .series import DateSeries

log = logging.getLogger(__name__)

EPOCH = date(2020, 2, 17)
FEED_KINDS = ("deaths", "tests", "twitter", "hospital", "zoe", "calls111", "online111")
PROFILES = ("us_state", "world", "nhs_region")

_COMMON_FLOORS = {
    "deaths": date(2020, 3, 24),
    "tests": date(2020, 3, 1),
    "hospital": date(2020, 3, 19),
    "zoe": date(2020, 5, 12),
    "calls111": date(2020, 3, 18),
    "online111": date(2020, 3, 18),
}
# earliest date each feed is available per region profile
START_FLOORS = {
    "us_state": {**_COMMON_FLOORS, "twitter": date(2020, 4, 13)},
    "world": {**_COMMON_FLOORS, "twitter": date(2020, 4, 13)},
    "nhs_region": {**_COMMON_FLOORS, "twitter": date(2020, 4, 9)},
}


def _check_kind(kind: str) -> None:
    if kind not in FEED_KINDS:
        raise ConfigError(f"unknown feed kind {kind!r}; expected one of {FEED_KINDS}")


@dataclass(frozen=True)
class FeedRecord:
    kind: str
    region: str
    series: DateSeries
    start: date | None = None  # declared start; defaults to the series start
    clamped: int = 0           # negative daily values set to zero on load

    def __post_init__(self):
        _check_kind(self.kind)
        if self.start is None:
            object.__setattr__(self, "start", self.series.start)
        vals = self.series.values[self.series.observed]
        if np.any(vals < 0) or np.any(vals != np.round(vals)):
            raise DataError(f"{self.kind}/{self.region}: counts must be non-negative integers")

    def check_floor(self, profile: str) -> None:
        """Reject a declared start earlier than the feed can exist for ``profile``."""
        if profile not in START_FLOORS:
            raise ConfigError(f"unknown region profile {profile!r}; expected one of {PROFILES}")
        floor = START_FLOORS[profile][self.kind]
        if self.start < floor:
            raise DataError(f"{self.kind}/{self.region}: start {self.start} precedes the "
                            f"{profile} availability date {floor}")


@dataclass(frozen=True)
class RegionBundle:
    region: str
    population: float
    feeds: Mapping[str, FeedRecord]
    epoch: date = EPOCH
    profile: str | None = None

    def __post_init__(self):
        if DEATHS not in self.feeds:
            raise DataError(f"region {self.region}: a deaths feed is required")
        if not self.population > 0:
            raise ConfigError("population must be positive")
        for kind, rec in self.feeds.items():
            if rec.kind != kind:
                raise DataError(f"feed stored under {kind!r} has kind {rec.kind!r}")
            if self.profile is not None:
                rec.check_floor(self.profile)
        object.__setattr__(self, "feeds", dict(self.feeds))

    def select(self, kinds: Iterable[str]) -> "RegionBundle":
        kinds = list(kinds)
        missing = [k for k in kinds if k not in self.feeds]
        if missing:
            raise ConfigError(f"region {self.region}: no data for feeds {missing}")
        if DEATHS not in kinds:
            kinds.insert(0, DEATHS)
        return replace(self, feeds={k: self.feeds[k] for k in kinds})

    def to_data_bundle(self) -> DataBundle:
        """Model input; call :func:`align` first so all series share the calendar."""
        return DataBundle(self.epoch, self.population,
                          {k: r.series for k, r in self.feeds.items()})


def _parse_date(text: str, where: str) -> date:
    text = text.strip()
    try:
        return date.fromisoformat(text)
    except ValueError:
        pass
    try:
        return datetime.strptime(text, "%m/%d/%y").date()  # dashboard style, 3/24/20
    except ValueError:
        raise DataError(f"{where}: malformed date {text!r}") from None


def _parse_count(text: str, where: str) -> float:
    try:
        v = float(text)
    except ValueError:
        raise DataError(f"{where}: non-numeric value {text!r}") from None
    if not math.isfinite(v) or v != round(v):
        raise DataError(f"{where}: expected an integer count, got {text!r}")
    return v


def cumulative_to_daily(cumulative) -> tuple[np.ndarray, int]:
    """First differences with the first value kept; negative revisions become
    zero. Returns ``(daily, n_clamped)``."""
    c = np.asarray(cumulative, dtype=float)
    if c.size == 0:
        return c.copy(), 0
    daily = np.diff(c, prepend=0.0)
    neg = daily < 0
    daily[neg] = 0.0
    return daily, int(neg.sum())


@dataclass(frozen=True)
class WideSchema:
    """Column layout of a wide CSV: one row per region, one column per day."""

    kind: str = DEATHS
    region_column: str = "region"
    cumulative: bool = True
    ignore_columns: tuple[str, ...] = field(default_factory=tuple)


def load_wide_csv(path, schema: WideSchema = WideSchema()) -> dict[str, FeedRecord]:
    _check_kind(schema.kind)
    path = Path(path)
    with path.open(newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise DataError(f"{path}: empty file")
    header = [h.strip() for h in rows[0]]
    if schema.region_column not in header:
        raise DataError(f"{path}: missing region column {schema.region_column!r}")
    rcol = header.index(schema.region_column)
    date_cols = [i for i, h in enumerate(header)
                 if i != rcol and h not in schema.ignore_columns]
    days = [_parse_date(header[i], f"{path} header") for i in date_cols]
    if not days:
        raise DataError(f"{path}: no date columns")
    for a, b in zip(days, days[1:]):
        if (b - a).days != 1:
            raise DataError(f"{path}: date columns must be consecutive days ({a} -> {b})")
    out: dict[str, FeedRecord] = {}
    for lineno, row in enumerate(rows[1:], start=2):
        if not any(cell.strip() for cell in row):
            continue
        if len(row) != len(header):
            raise DataError(f"{path}:{lineno}: expected {len(header)} cells, got {len(row)}")
        region = row[rcol].strip()
        if region in out:
            raise DataError(f"{path}:{lineno}: duplicate region {region!r}")
        values = np.array([_parse_count(row[i], f"{path}:{lineno}") for i in date_cols])
        clamped = 0
        if schema.cumulative:
            values, clamped = cumulative_to_daily(values)
            if clamped:
                log.warning("%s: %s/%s has %d negative daily revisions clamped to 0",
                            path, schema.kind, region, clamped)
        elif np.any(values < 0):
            raise DataError(f"{path}:{lineno}: negative daily count")
        out[region] = FeedRecord(schema.kind, region, DateSeries(days[0], values),
                                 clamped=clamped)
    return out


def load_long_csv(path, kind: str) -> dict[str, FeedRecord]:
    """Daily counts in ``region,date,count`` rows; absent days are missing."""
    _check_kind(kind)
    path = Path(path)
    by_region: dict[str, dict[date, float]] = {}
    with path.open(newline="") as fh:
        reader = csv.DictReader(fh)
        need = {"region", "date", "count"}
        if not need <= set(reader.fieldnames or ()):
            raise DataError(f"{path}: expected columns region,date,count")
        for lineno, row in enumerate(reader, start=2):
            where = f"{path}:{lineno}"
            day = _parse_date(row["date"], where)
            count = _parse_count(row["count"], where)
            if count < 0:
                raise DataError(f"{where}: negative count")
            counts = by_region.setdefault(row["region"].strip(), {})
            if day in counts:
                raise DataError(f"{where}: duplicate entry for {row['region']} on {day}")
            counts[day] = count
    return {r: FeedRecord(kind, r, DateSeries.from_mapping(c)) for r, c in by_region.items()}


def _no_duplicate_keys(pairs):
    out = {}
    for k, v in pairs:
        if k in out:
            raise DataError(f"duplicate key {k!r}")
        out[k] = v
    return out


def load_tweet_counts_json(path, known_regions: Iterable[str] | None = None
                           ) -> dict[str, FeedRecord]:
    """``{region: {YYYY-MM-DD: count}}`` as written by the tweet pipeline."""
    path = Path(path)
    try:
        raw = json.loads(path.read_text(), object_pairs_hook=_no_duplicate_keys)
    except json.JSONDecodeError as exc:
        raise DataError(f"{path}: invalid JSON ({exc})") from None
    except DataError as exc:
        raise DataError(f"{path}: {exc}") from None
    if not isinstance(raw, dict):
        raise DataError(f"{path}: expected an object mapping region -> date -> count")
    known = None if known_regions is None else set(known_regions)
    out = {}
    for region, days in raw.items():
        if known is not None and region not in known:
            raise DataError(f"{path}: unknown region id {region!r}")
        if not isinstance(days, dict):
            raise DataError(f"{path}: region {region!r} must map dates to counts")
        counts = {}
        for key, value in days.items():
            where = f"{path} [{region}][{key}]"
            if isinstance(value, bool) or not isinstance(value, (int, float)):
                raise DataError(f"{where}: non-numeric count")
            if value < 0:
                raise DataError(f"{where}: negative count")
            counts[_parse_date(key, where)] = _parse_count(str(value), where)
        if counts:
            out[region] = FeedRecord("twitter", region, DateSeries.from_mapping(counts))
    return out


def align(bundle: RegionBundle, analysis_end: date) -> RegionBundle:
    """Project every feed onto ``[epoch, analysis_end]``.

    Days before a feed's declared start or outside its data are flagged
    missing. Idempotent.
    """
    if analysis_end < bundle.epoch:
        raise ConfigError(f"analysis end {analysis_end} precedes the epoch {bundle.epoch}")
    feeds = {}
    for kind, rec in bundle.feeds.items():
        s = rec.series.reindex(bundle.epoch, analysis_end).mask_before(rec.start)
        feeds[kind] = replace(rec, series=s)
    return replace(bundle, feeds=feeds)


def leading_missing_days(series: DateSeries) -> int:
    idx = np.flatnonzero(series.observed)
    return len(series) if idx.size == 0 else int(idx[0])
