import json
from datetime import date, timedelta

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from epifuse.errors import ConfigError, DataError
from epifuse.ingest import (
    EPOCH,
    START_FLOORS,
    FeedRecord,
    RegionBundle,
    WideSchema,
    align,
    cumulative_to_daily,
    leading_missing_days,
    load_long_csv,
    load_tweet_counts_json,
    load_wide_csv,
)
from epifuse.series import DateSeries


def write(tmp_path, name, text):
    p = tmp_path / name
    p.write_text(text)
    return p


def wide(days, rows):
    header = "region," + ",".join(d.isoformat() for d in days)
    return "\n".join([header] + [f"{r}," + ",".join(str(v) for v in vals)
                                 for r, vals in rows]) + "\n"


D0 = date(2020, 3, 24)
DAYS4 = [D0 + timedelta(days=i) for i in range(4)]


def deaths_record(start=D0, values=(1, 2, 3)):
    return FeedRecord("deaths", "X", DateSeries(start, values))


# differencing ----------------------------------------------------------------

def test_cumulative_difference():
    daily, n = cumulative_to_daily([0, 1, 3, 3])
    assert daily.tolist() == [0, 1, 2, 0] and n == 0


def test_cumulative_revision_is_clamped():
    daily, n = cumulative_to_daily([5, 4])
    assert daily.tolist() == [5, 0] and n == 1


@settings(max_examples=50)
@given(st.lists(st.integers(0, 10_000), min_size=1, max_size=60))
def test_daily_cumsum_round_trip(daily):
    back, n = cumulative_to_daily(np.cumsum(daily))
    assert back.tolist() == daily and n == 0


# wide csv ---------------------------------------------------------------------

def test_load_wide_csv(tmp_path):
    p = write(tmp_path, "d.csv", wide(DAYS4, [("A", [0, 1, 3, 3]), ("B", [5, 4, 6, 6])]))
    recs = load_wide_csv(p)
    assert recs["A"].series.values.tolist() == [0, 1, 2, 0]
    assert recs["A"].series.start == D0
    assert recs["B"].series.values.tolist() == [5, 0, 2, 0]
    assert recs["B"].clamped == 1 and recs["A"].clamped == 0


def test_wide_csv_clamp_warns(tmp_path, caplog):
    p = write(tmp_path, "d.csv", wide(DAYS4[:2], [("A", [5, 4])]))
    with caplog.at_level("WARNING"):
        load_wide_csv(p)
    assert "1 negative daily revisions" in caplog.text


def test_wide_csv_dashboard_dates_and_ignored_columns(tmp_path):
    text = "Province,region,3/24/20,3/25/20\nfoo,A,2,5\n"
    p = write(tmp_path, "d.csv", text)
    recs = load_wide_csv(p, WideSchema(ignore_columns=("Province",)))
    assert recs["A"].series.start == D0
    assert recs["A"].series.values.tolist() == [2, 3]


def test_wide_csv_daily_schema(tmp_path):
    p = write(tmp_path, "d.csv", wide(DAYS4[:3], [("A", [4, 1, 2])]))
    recs = load_wide_csv(p, WideSchema(kind="tests", cumulative=False))
    assert recs["A"].kind == "tests"
    assert recs["A"].series.values.tolist() == [4, 1, 2]


@pytest.mark.parametrize("text", [
    "region,2020-03-24,2020-13-01\nA,1,2\n",      # malformed date
    "region,2020-03-24,2020-03-25\nA,1,x\n",      # non-numeric cell
    "region,2020-03-24,2020-03-25\nA,1,2\nA,1,2\n",  # duplicate region
    "region,2020-03-24,2020-03-26\nA,1,2\n",      # gap in date columns
    "region,2020-03-24,2020-03-25\nA,1,2.5\n",    # fractional count
    "region,2020-03-24,2020-03-25\nA,1\n",        # short row
    "name,2020-03-24\nA,1\n",                     # no region column
])
def test_wide_csv_errors(tmp_path, text):
    with pytest.raises(DataError):
        load_wide_csv(write(tmp_path, "bad.csv", text))


# long csv ---------------------------------------------------------------------

def test_long_csv_gaps_are_missing(tmp_path):
    text = "region,date,count\nA,2020-03-01,4\nA,2020-03-03,6\nB,2020-03-02,1\n"
    recs = load_long_csv(write(tmp_path, "l.csv", text), "tests")
    s = recs["A"].series
    assert s.values.tolist() == [4, 0, 6]
    assert s.observed.tolist() == [True, False, True]
    assert recs["B"].series.start == date(2020, 3, 2)


@pytest.mark.parametrize("text", [
    "region,date,count\nA,2020-03-01,4\nA,2020-03-01,5\n",
    "region,date,count\nA,2020-03-01,-1\n",
    "region,day,count\nA,2020-03-01,1\n",
])
def test_long_csv_errors(tmp_path, text):
    with pytest.raises(DataError):
        load_long_csv(write(tmp_path, "l.csv", text), "tests")


# tweet json -------------------------------------------------------------------

def test_tweet_json_empty(tmp_path):
    assert load_tweet_counts_json(write(tmp_path, "t.json", "{}")) == {}


def test_tweet_json_single_point(tmp_path):
    p = write(tmp_path, "t.json", json.dumps({"NY": {"2020-04-13": 7}}))
    rec = load_tweet_counts_json(p)["NY"]
    assert rec.kind == "twitter"
    assert rec.series.start == date(2020, 4, 13) and rec.series.values.tolist() == [7]


@pytest.mark.parametrize("text", [
    '{"NY": {"2020-04-13": 1, "2020-04-13": 2}}',
    '{"NY": {"2020-04-13": -1}}',
    '{"NY": {"2020-04-13": "many"}}',
    '{"NY": {"13/04/2020": 1}}',
    '{"NY": [1, 2]}',
    '[1]',
    '{"NY": {',
])
def test_tweet_json_errors(tmp_path, text):
    with pytest.raises(DataError):
        load_tweet_counts_json(write(tmp_path, "t.json", text))


def test_tweet_json_unknown_region(tmp_path):
    p = write(tmp_path, "t.json", json.dumps({"ZZ": {"2020-04-13": 1}}))
    with pytest.raises(DataError, match="unknown region"):
        load_tweet_counts_json(p, known_regions={"NY"})


# records and bundles ------------------------------------------------------------

def test_record_rejects_negative_counts():
    with pytest.raises(DataError):
        FeedRecord("deaths", "X", DateSeries(D0, [1, -1]))


def test_record_rejects_unknown_kind():
    with pytest.raises(ConfigError):
        FeedRecord("rumours", "X", DateSeries(D0, [1]))


def test_bundle_requires_deaths():
    tests = FeedRecord("tests", "X", DateSeries(D0, [1]))
    with pytest.raises(DataError):
        RegionBundle("X", 1e6, {"tests": tests})


def test_profile_floors():
    early = FeedRecord("twitter", "X", DateSeries(date(2020, 4, 10), [1]))
    RegionBundle("X", 1e6, {"deaths": deaths_record(), "twitter": early},
                 profile="nhs_region")
    with pytest.raises(DataError):
        RegionBundle("X", 1e6, {"deaths": deaths_record(), "twitter": early},
                     profile="us_state")
    assert START_FLOORS["world"]["zoe"] == date(2020, 5, 12)


def test_select_keeps_deaths():
    tests = FeedRecord("tests", "X", DateSeries(D0, [1, 2, 3]))
    b = RegionBundle("X", 1e6, {"deaths": deaths_record(), "tests": tests})
    assert list(b.select(["tests"]).feeds) == ["deaths", "tests"]
    with pytest.raises(ConfigError):
        b.select(["zoe"])


# alignment -----------------------------------------------------------------------

def test_tweet_feed_alignment_leading_missing_days():
    tweets = FeedRecord("twitter", "NY", DateSeries(date(2020, 4, 13), np.ones(30)))
    b = RegionBundle("NY", 1e6, {"deaths": deaths_record(), "twitter": tweets},
                     profile="us_state")
    out = align(b, date(2020, 6, 1))
    s = out.feeds["twitter"].series
    assert s.start == EPOCH
    assert leading_missing_days(s) == 56
    assert s.total() == 30


def test_align_marks_missing_not_zero():
    b = RegionBundle("X", 1e6, {"deaths": deaths_record()})
    s = align(b, date(2020, 4, 1)).feeds["deaths"].series
    k = (D0 - EPOCH).days
    assert not s.observed[:k].any()
    assert s.observed[k:k + 3].all() and not s.observed[k + 3:].any()
    assert s.values[k:k + 3].tolist() == [1, 2, 3]


def test_align_respects_declared_start():
    rec = FeedRecord("deaths", "X", DateSeries(D0, [1, 2, 3]), start=D0 + timedelta(days=1))
    s = align(RegionBundle("X", 1e6, {"deaths": rec}), date(2020, 4, 1)).feeds["deaths"].series
    assert s.total() == 5


def test_align_truncates_and_is_idempotent():
    rec = FeedRecord("deaths", "X", DateSeries(EPOCH, np.arange(100.0)))
    b = RegionBundle("X", 1e6, {"deaths": rec})
    end = EPOCH + timedelta(days=9)
    once = align(b, end)
    twice = align(once, end)
    assert once.feeds["deaths"].series == twice.feeds["deaths"].series
    assert len(once.feeds["deaths"].series) == 10


@settings(max_examples=40)
@given(st.integers(-30, 60), st.integers(1, 40), st.integers(0, 90))
def test_align_never_fabricates_counts(shift, n, end_offset):
    start = EPOCH + timedelta(days=shift)
    rec = FeedRecord("deaths", "X", DateSeries(start, np.arange(1.0, n + 1)))
    out = align(RegionBundle("X", 1e6, {"deaths": rec}), EPOCH + timedelta(days=end_offset))
    assert out.feeds["deaths"].series.total() <= rec.series.total()


def test_align_rejects_end_before_epoch():
    with pytest.raises(ConfigError):
        align(RegionBundle("X", 1e6, {"deaths": deaths_record()}), EPOCH - timedelta(days=1))


def test_to_data_bundle():
    b = align(RegionBundle("X", 1e6, {"deaths": deaths_record()}), date(2020, 4, 30))
    data = b.to_data_bundle()
    assert data.t0 == EPOCH and data.n_days == (date(2020, 4, 30) - EPOCH).days + 1
    assert data.series["deaths"].total() == 6
