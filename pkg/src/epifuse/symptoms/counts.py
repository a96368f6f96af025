"""Daily symptomatic tweet counts per region with server-downtime correction."""
from __future__ import annotations

import json
from collections import defaultdict
from dataclasses import dataclass
from datetime import date, datetime, timedelta, timezone
from decimal import ROUND_HALF_UP, Decimal
from pathlib import Path
from typing import Callable, Iterable, Mapping, Sequence

from .geo import RegionPolygon, geolocate
from .skipgram import SkipGramModel, vectorize
from .svm import SYMPTOMATIC, SvmModel, classify
from .text import Lexicon, Tweet, drop_retweets, keyword_filter

PERIODS_PER_DAY = 96  # 15-minute periods


def symptomatic_count(labels: Iterable[int]) -> int:
    return sum(1 for lab in labels if lab in SYMPTOMATIC)


def correct_for_downtime(count: float, downtime_periods: int) -> float:
    """Scale a day's count up for the 15-minute periods the collector was offline."""
    if not 0 <= downtime_periods < PERIODS_PER_DAY or int(downtime_periods) != downtime_periods:
        raise ValueError(f"downtime_periods must be an integer in [0, {PERIODS_PER_DAY - 1}]; "
                         "a fully offline day is missing data")
    return count * PERIODS_PER_DAY / (PERIODS_PER_DAY - downtime_periods)


def _utc_naive(ts: datetime) -> datetime:
    if ts.tzinfo is not None:
        ts = ts.astimezone(timezone.utc).replace(tzinfo=None)
    return ts


def count_downtime_periods(timestamps: Iterable[datetime], day: date) -> int:
    """Periods of ``day`` (UTC) with no recorded tweet at all."""
    start = datetime(day.year, day.month, day.day)
    seen = set()
    for ts in timestamps:
        offset = (_utc_naive(ts) - start).total_seconds()
        if 0 <= offset < 86400:
            seen.add(int(offset // 900))
    return PERIODS_PER_DAY - len(seen)


@dataclass(frozen=True)
class TweetClassifier:
    """Skip-gram vectoriser followed by the linear SVM."""

    embedding: SkipGramModel
    svm: SvmModel

    def __call__(self, tweet: Tweet) -> int:
        return classify(self.svm, vectorize(tweet.text, self.embedding))


def aggregate_daily(tweets: Iterable[Tweet], classifier: Callable[[Tweet], int],
                    lexicons: Mapping[str, Lexicon], polygons: Sequence[RegionPolygon],
                    gazetteer: Mapping[str, str], regions: Sequence[str],
                    downtime_periods: int = 0) -> dict[str, float]:
    """One day's corrected symptomatic counts for every region in ``regions``.

    Tweets in a language without a lexicon, or that cannot be placed in one
    of ``regions``, are ignored.
    """
    wanted = set(regions)
    raw = dict.fromkeys(regions, 0)
    for tw in drop_retweets(tweets):
        lex = lexicons.get(tw.lang)
        if lex is None or not keyword_filter(tw.text, lex):
            continue
        region = geolocate(tw, polygons, gazetteer)
        if region is None or region not in wanted:
            continue
        if classifier(tw) in SYMPTOMATIC:
            raw[region] += 1
    return {r: correct_for_downtime(c, downtime_periods) for r, c in raw.items()}


def aggregate_stream(tweets: Sequence[Tweet], classifier: Callable[[Tweet], int],
                     lexicons: Mapping[str, Lexicon], polygons: Sequence[RegionPolygon],
                     gazetteer: Mapping[str, str], regions: Sequence[str]
                     ) -> dict[date, dict[str, float]]:
    """Split timestamped tweets by UTC day and aggregate each day.

    Downtime is measured on every recorded tweet, before any filtering. Days
    between the first and last tweet with no record at all are left out:
    the correction is undefined there.
    """
    by_day: dict[date, list[Tweet]] = defaultdict(list)
    for tw in tweets:
        if tw.timestamp is None:
            raise ValueError("every tweet needs a timestamp to be split by day")
        by_day[_utc_naive(tw.timestamp).date()].append(tw)
    if not by_day:
        return {}
    out = {}
    day, last = min(by_day), max(by_day)
    while day <= last:
        todays = by_day.get(day, [])
        down = count_downtime_periods((t.timestamp for t in todays), day)
        if down < PERIODS_PER_DAY:
            out[day] = aggregate_daily(todays, classifier, lexicons, polygons, gazetteer,
                                       regions, down)
        day += timedelta(days=1)
    return out


def round_half_up(x: float) -> int:
    return int(Decimal(repr(float(x))).quantize(Decimal(1), rounding=ROUND_HALF_UP))


def tweet_counts_payload(daily: Mapping[date, Mapping[str, float]]) -> dict:
    """``{region: {YYYY-MM-DD: count}}`` with counts rounded half up."""
    out: dict[str, dict[str, int]] = defaultdict(dict)
    for day in sorted(daily):
        for region, value in daily[day].items():
            out[region][day.isoformat()] = round_half_up(value)
    return {r: out[r] for r in sorted(out)}


def write_tweet_counts_json(path, daily: Mapping[date, Mapping[str, float]]) -> None:
    Path(path).write_text(json.dumps(tweet_counts_payload(daily), indent=2) + "\n")
