"""Run configuration read from TOML.

Example::

    region = "R1"
    profile = "world"          # optional; enforces per-feed start dates
    population = 1_000_000
    epoch = "2020-02-17"
    end_date = "2020-06-15"
    horizon = 7
    seed = 0
    out = "runs/r1"
    active_feeds = ["deaths", "twitter"]

    [feeds.deaths]
    path = "deaths.csv"
    format = "wide"            # wide | long | tweets_json
    cumulative = true

    [feeds.twitter]
    path = "tweet_counts.json"
    format = "tweets_json"

    [sampler]
    n_chains = 6
    n_draws = 2000
    n_burn_in = 1000

Relative paths are resolved against the directory of the config file.
"""
from __future__ import annotations

import sys
from dataclasses import dataclass, field, fields, replace
from datetime import date
from pathlib import Path
from typing import Any, Mapping

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .errors import ConfigError
from .inference.model import DEATHS, Priors
from .inference.sampler import SamplerConfig
from .ingest import EPOCH, FEED_KINDS, PROFILES
from .observation import DEFAULT_FEED_LAGS

FORMATS = ("wide", "long", "tweets_json")
# Thinned sampling from a Laplace-shaped proposal; see README for timings.
DEFAULT_SAMPLER = SamplerConfig(covariance="fixed", thin=10)


@dataclass(frozen=True)
class FeedSource:
    kind: str
    path: Path
    format: str = "long"
    cumulative: bool = False
    region_column: str = "region"
    start: date | None = None

    def __post_init__(self):
        if self.kind not in FEED_KINDS:
            raise ConfigError(f"unknown feed kind {self.kind!r}; expected one of {FEED_KINDS}")
        if self.format not in FORMATS:
            raise ConfigError(f"feed {self.kind}: format must be one of {FORMATS}")
        if self.format == "tweets_json" and self.kind != "twitter":
            raise ConfigError(f"feed {self.kind}: tweets_json only carries twitter counts")


@dataclass(frozen=True)
class ClassifyConfig:
    tweets: Path | None = None
    labelled: Path | None = None      # CSV with text,label columns
    geojson: Path | None = None
    gazetteer: Path | None = None
    regions: tuple[str, ...] = ()
    languages: tuple[str, ...] = ("en",)
    output: Path | None = None
    embedding_dim: int = 50
    window: int = 5
    negatives: int = 5
    epochs: int = 5
    balance_to: int | None = None


@dataclass(frozen=True)
class RunConfig:
    region: str
    population: float
    end_date: date
    feeds: Mapping[str, FeedSource] = field(default_factory=dict)
    active_feeds: tuple[str, ...] = (DEATHS,)
    profile: str | None = None
    epoch: date = EPOCH
    horizon: int = 7
    seed: int = 0
    out: Path = Path("out")
    sampler: SamplerConfig = DEFAULT_SAMPLER
    priors: Priors = Priors()
    delay_mean: float = 21.0
    delay_sd: float = 8.0
    feed_lags: int = DEFAULT_FEED_LAGS
    classify: ClassifyConfig = ClassifyConfig()

    def __post_init__(self):
        if DEATHS not in self.active_feeds:
            object.__setattr__(self, "active_feeds", (DEATHS, *self.active_feeds))
        if len(set(self.active_feeds)) != len(self.active_feeds):
            raise ConfigError("active_feeds lists a feed twice")
        for kind in self.active_feeds:
            if kind not in FEED_KINDS:
                raise ConfigError(f"unknown feed {kind!r}; expected one of {FEED_KINDS}")
        if self.profile is not None and self.profile not in PROFILES:
            raise ConfigError(f"profile must be one of {PROFILES}")
        if self.horizon < 1:
            raise ConfigError("horizon must be at least 1")
        if not self.population > 0:
            raise ConfigError("population must be positive")
        if self.end_date < self.epoch:
            raise ConfigError(f"end_date {self.end_date} precedes the epoch {self.epoch}")

    def require_sources(self) -> None:
        """Every active feed, deaths included, must name a data file."""
        missing = [k for k in self.active_feeds if k not in self.feeds]
        if missing:
            raise ConfigError(f"no [feeds.<kind>] table for active feeds {missing}")

    def with_overrides(self, sampler: dict | None = None, **top) -> "RunConfig":
        """Replace top-level and sampler fields; ``None`` values are ignored.

        The sampler always runs on the root seed.
        """
        top = {k: v for k, v in top.items() if v is not None}
        samp = {k: v for k, v in (sampler or {}).items() if v is not None}
        try:
            cfg = replace(self, **top)
            return replace(cfg, sampler=replace(cfg.sampler, seed=cfg.seed, **samp))
        except ValueError as exc:
            raise ConfigError(str(exc)) from None

    def to_dict(self) -> dict:
        return {
            "region": self.region, "profile": self.profile, "population": self.population,
            "epoch": self.epoch.isoformat(), "end_date": self.end_date.isoformat(),
            "horizon": self.horizon, "seed": self.seed, "out": str(self.out),
            "active_feeds": list(self.active_feeds),
            "feeds": {k: {"path": str(s.path), "format": s.format, "cumulative": s.cumulative,
                          "region_column": s.region_column,
                          "start": s.start.isoformat() if s.start else None}
                      for k, s in self.feeds.items()},
            "sampler": self.sampler.to_dict(),
            "priors": {f.name: getattr(self.priors, f.name) for f in fields(Priors)},
            "delay": {"mean": self.delay_mean, "sd": self.delay_sd},
            "feed_lags": self.feed_lags,
        }


def _date(value: Any, key: str) -> date:
    if isinstance(value, date):
        return value
    try:
        return date.fromisoformat(str(value))
    except ValueError:
        raise ConfigError(f"{key}: expected an ISO date, got {value!r}") from None


def _path(value: Any, base: Path) -> Path:
    p = Path(str(value))
    return p if p.is_absolute() else base / p


def _check_keys(table: Mapping, allowed: set[str], where: str) -> None:
    extra = set(table) - allowed
    if extra:
        raise ConfigError(f"{where}: unknown keys {sorted(extra)}")


def _feed(kind: str, table: Mapping, base: Path) -> FeedSource:
    _check_keys(table, {"path", "format", "cumulative", "region_column", "start"},
                f"[feeds.{kind}]")
    if "path" not in table:
        raise ConfigError(f"[feeds.{kind}] needs a path")
    return FeedSource(
        kind=kind, path=_path(table["path"], base), format=table.get("format", "long"),
        cumulative=bool(table.get("cumulative", False)),
        region_column=table.get("region_column", "region"),
        start=_date(table["start"], f"feeds.{kind}.start") if "start" in table else None)


def _classify(table: Mapping, base: Path) -> ClassifyConfig:
    allowed = {f.name for f in fields(ClassifyConfig)}
    _check_keys(table, allowed, "[classify]")
    kw: dict[str, Any] = {}
    for key in ("tweets", "labelled", "geojson", "gazetteer", "output"):
        if key in table:
            kw[key] = _path(table[key], base)
    for key in ("regions", "languages"):
        if key in table:
            kw[key] = tuple(str(v) for v in table[key])
    for key in ("embedding_dim", "window", "negatives", "epochs", "balance_to"):
        if key in table:
            kw[key] = int(table[key])
    return ClassifyConfig(**kw)


TOP_KEYS = {"region", "profile", "population", "epoch", "end_date", "horizon", "seed", "out",
            "active_feeds", "feeds", "sampler", "priors", "delay", "feed_lags", "classify"}


def from_dict(doc: Mapping, base: Path = Path(".")) -> RunConfig:
    _check_keys(doc, TOP_KEYS, "config")
    for key in ("region", "population", "end_date"):
        if key not in doc:
            raise ConfigError(f"config is missing {key!r}")
    if "seed" in doc.get("sampler", {}):
        raise ConfigError("[sampler]: set the top-level seed; it drives every random stream")
    try:
        sampler = replace(DEFAULT_SAMPLER, seed=int(doc.get("seed", 0)),
                          **doc.get("sampler", {}))
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"[sampler]: {exc}") from None
    try:
        priors = Priors.from_dict(doc.get("priors", {}))
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"[priors]: {exc}") from None
    delay = doc.get("delay", {})
    _check_keys(delay, {"mean", "sd"}, "[delay]")
    feeds = {k: _feed(k, t, base) for k, t in doc.get("feeds", {}).items()}
    kw: dict[str, Any] = dict(
        region=str(doc["region"]), population=float(doc["population"]),
        end_date=_date(doc["end_date"], "end_date"), feeds=feeds,
        active_feeds=tuple(doc.get("active_feeds", [DEATHS])),
        profile=doc.get("profile"), sampler=sampler, priors=priors,
        classify=_classify(doc.get("classify", {}), base))
    if "epoch" in doc:
        kw["epoch"] = _date(doc["epoch"], "epoch")
    if "out" in doc:
        kw["out"] = _path(doc["out"], base)
    for key in ("horizon", "seed", "feed_lags"):
        if key in doc:
            kw[key] = int(doc[key])
    if "mean" in delay:
        kw["delay_mean"] = float(delay["mean"])
    if "sd" in delay:
        kw["delay_sd"] = float(delay["sd"])
    return RunConfig(**kw)


def load(path) -> RunConfig:
    path = Path(path)
    try:
        doc = tomllib.loads(path.read_text())
    except FileNotFoundError:
        raise ConfigError(f"config file {path} not found") from None
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"{path}: {exc}") from None
    return from_dict(doc, path.parent)
