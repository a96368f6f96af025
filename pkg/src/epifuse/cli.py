"""Command-line front end: ``epifuse {classify,fit,forecast,evaluate,simulate}``.

Re-running a command on the same config and inputs gives bit-identical output.
Exit codes: 0 success, 2 config error, 3 data error, 4 numerical failure.
"""
from __future__ import annotations

import argparse
import csv
import logging
import os
import sys
import time
from dataclasses import replace
from datetime import date
from pathlib import Path
from typing import Sequence

import numpy as np

from . import config as configmod
from .config import FeedSource, RunConfig
from .errors import ConfigError, DataError, EpifuseError
from .evaluation import Forecast, compare, write_table_csv
from .inference import DEATHS, FusionModel, fit, posterior_predictive
from .inference.export import (
    diagnostics,
    read_forecast_csv,
    read_json,
    read_posterior_csv,
    write_forecast_csv,
    write_json,
    write_posterior_csv,
)
from .inference.sampler import STREAM_SIMULATE, spawn_rng
from .ingest import (
    FeedRecord,
    RegionBundle,
    WideSchema,
    align,
    load_long_csv,
    load_tweet_counts_json,
    load_wide_csv,
)
from .observation import DelayPmf
from .synthetic import Scenario, feed_link, generate

log = logging.getLogger("epifuse")


# inputs ---------------------------------------------------------------------------

def _load_feed(src: FeedSource, region: str) -> FeedRecord:
    if not src.path.exists():
        raise DataError(f"{src.kind} feed file {src.path} not found")
    if src.format == "wide":
        records = load_wide_csv(src.path, WideSchema(src.kind, src.region_column,
                                                     src.cumulative))
    elif src.format == "long":
        records = load_long_csv(src.path, src.kind)
    else:
        records = load_tweet_counts_json(src.path)
    if region not in records:
        raise DataError(f"{src.path}: no {src.kind} data for region {region!r}")
    rec = records[region]
    return rec if src.start is None else replace(rec, start=src.start)


def load_bundle(cfg: RunConfig) -> RegionBundle:
    """Active feeds for the configured region, aligned to ``[epoch, end_date]``."""
    cfg.require_sources()
    feeds = {k: _load_feed(cfg.feeds[k], cfg.region) for k in cfg.active_feeds}
    bundle = RegionBundle(cfg.region, cfg.population, feeds, cfg.epoch, cfg.profile)
    return align(bundle, cfg.end_date)


def build_model(cfg: RunConfig) -> FusionModel:
    data = load_bundle(cfg).to_data_bundle()
    try:
        delay = DelayPmf.discretized_gamma(cfg.delay_mean, cfg.delay_sd)
    except ValueError as exc:
        raise ConfigError(f"[delay]: {exc}") from None
    return FusionModel(data, cfg.priors, delay=delay, feed_lags=cfg.feed_lags)


def read_truth(path, region: str, days: Sequence[date]) -> np.ndarray:
    """Observed deaths on ``days`` from a ``region,date,count`` CSV."""
    path = Path(path)
    if not path.exists():
        raise DataError(f"truth file {path} not found")
    records = load_long_csv(path, DEATHS)
    if region not in records:
        raise DataError(f"{path}: no data for region {region!r}")
    series = records[region].series
    out = []
    for day in days:
        if not series.start <= day <= series.end or not series.observed[series.offset(day)]:
            raise DataError(f"{path}: no observed deaths for {region} on {day}")
        out.append(series.value_at(day))
    return np.array(out)


def read_forecast(path) -> tuple[list[date], Forecast]:
    path = Path(path)
    if not path.exists():
        raise DataError(f"forecast file {path} not found")
    try:
        rows = read_forecast_csv(path)
    except (ValueError, KeyError) as exc:
        raise DataError(str(exc)) from None
    days = sorted(rows)
    return days, Forecast([rows[d]["mean"] for d in days], [rows[d]["variance"] for d in days])


def read_labelled(path) -> tuple[list[str], list[int]]:
    texts, labels = [], []
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        if not {"text", "label"} <= set(reader.fieldnames or ()):
            raise DataError(f"{path}: expected columns text,label")
        for lineno, row in enumerate(reader, start=2):
            try:
                labels.append(int(row["label"]))
            except ValueError:
                raise DataError(f"{path}:{lineno}: label must be an integer") from None
            texts.append(row["text"])
    return texts, labels


# commands --------------------------------------------------------------------------

def cmd_classify(cfg: RunConfig) -> Path:
    """Classify a tweet file and write daily symptomatic counts per region."""
    from .symptoms import (
        Lexicon,
        aggregate_stream,
        load_gazetteer,
        load_geojson,
        read_tweets,
        train_pipeline,
        write_tweet_counts_json,
    )

    cc = cfg.classify
    for key in ("tweets", "labelled", "geojson"):
        if getattr(cc, key) is None:
            raise ConfigError(f"[classify] needs {key!r}")
        if not getattr(cc, key).exists():
            raise DataError(f"[classify] {key} file {getattr(cc, key)} not found")
    texts, labels = read_labelled(cc.labelled)
    classifier = train_pipeline(texts, labels, d=cc.embedding_dim, window=cc.window,
                                negatives=cc.negatives, epochs=cc.epochs, seed=cfg.seed,
                                balance_to=cc.balance_to)
    polygons = load_geojson(cc.geojson)
    gazetteer = load_gazetteer(cc.gazetteer) if cc.gazetteer is not None else {}
    regions = list(cc.regions) or [p.region for p in polygons]
    lexicons = {lang: Lexicon.builtin(lang) for lang in cc.languages}
    daily = aggregate_stream(read_tweets(cc.tweets), classifier, lexicons, polygons,
                             gazetteer, regions)
    out = cc.output or cfg.out / "tweet_counts.json"
    out.parent.mkdir(parents=True, exist_ok=True)
    write_tweet_counts_json(out, daily)
    return out


def cmd_fit(cfg: RunConfig, jobs: int = 1) -> dict[str, Path]:
    """Fit the active feeds and write posterior, diagnostics and manifest."""
    model = build_model(cfg)
    started = time.perf_counter()
    samples = fit(model, cfg.sampler, jobs=jobs)
    elapsed = time.perf_counter() - started
    cfg.out.mkdir(parents=True, exist_ok=True)
    paths = {"posterior": cfg.out / "posterior.csv",
             "diagnostics": cfg.out / "diagnostics.json",
             "manifest": cfg.out / "manifest.json"}
    write_posterior_csv(paths["posterior"], samples, model)
    diag = diagnostics(samples)
    write_json(paths["diagnostics"], diag)
    write_json(paths["manifest"], {
        "command": "fit", "config": cfg.to_dict(), "seed": cfg.seed,
        "sampler_seed": cfg.sampler.seed, "data_end": model.data.end.isoformat(),
        "feeds": list(model.data.series), "parameters": model.constrained_names(),
        "max_rhat": diag["max_rhat"], "files": {k: p.name for k, p in paths.items()}})
    log.info("fit finished in %.1f s; max R-hat %s", elapsed, diag["max_rhat"])
    return paths


def cmd_forecast(cfg: RunConfig, posterior: Path | None = None) -> Path:
    """Posterior predictive deaths for ``cfg.horizon`` days after ``end_date``."""
    posterior = posterior or cfg.out / "posterior.csv"
    if not Path(posterior).exists():
        raise DataError(f"posterior file {posterior} not found")
    model = build_model(cfg)
    try:
        samples = read_posterior_csv(posterior, model)
    except ValueError as exc:
        raise DataError(str(exc)) from None
    fc = posterior_predictive(samples, model, horizon=cfg.horizon, seed=cfg.seed)
    cfg.out.mkdir(parents=True, exist_ok=True)
    out = cfg.out / "forecast.csv"
    write_forecast_csv(out, fc)
    return out


def cmd_evaluate(cfg: RunConfig, baseline: Path, candidates: dict[str, Path],
                 truth: Path) -> Path:
    """One table row for ``cfg.region``: baseline MAE and NEES, then each
    candidate's MAE change against the baseline and its NEES."""
    days, base = read_forecast(baseline)
    fcs = {}
    for name, path in candidates.items():
        cdays, fc = read_forecast(path)
        if cdays != days:
            raise DataError(f"{path}: forecast days differ from the baseline's")
        fcs[name] = fc
    y = read_truth(truth, cfg.region, days)
    try:
        row = compare(cfg.region, base, fcs, y)
    except ValueError as exc:
        raise DataError(str(exc)) from None
    cfg.out.mkdir(parents=True, exist_ok=True)
    out = cfg.out / "evaluation.csv"
    write_table_csv(out, [row], feeds=list(candidates))
    return out


def scenario_from_params(doc: dict, cfg: RunConfig) -> Scenario:
    doc = dict(doc)
    feeds = {}
    for name, entry in doc.pop("feeds", {}).items():
        if name == DEATHS or name not in configmod.FEED_KINDS:
            raise ConfigError(f"params: invalid feed name {name!r}")
        entry = dict(entry)
        if "lag_weights" in entry:
            weights = np.asarray(entry.pop("lag_weights"), dtype=float)
        else:
            weights = DelayPmf.discretized_gamma(entry.pop("lag_mean", 5.0),
                                                 entry.pop("lag_sd", 2.5),
                                                 max_lag=cfg.feed_lags).probs
        feeds[name] = feed_link(float(entry.pop("kappa")), weights, float(entry.pop("phi", 100)))
        if entry:
            raise ConfigError(f"params: unknown keys {sorted(entry)} for feed {name}")
    allowed = {"population", "n_days", "seed", "beta_knots", "latent_period",
               "infectious_period", "ifr", "phi_deaths", "delay_mean", "delay_sd"}
    extra = set(doc) - allowed
    if extra:
        raise ConfigError(f"params: unknown keys {sorted(extra)}")
    kw = {k: (tuple(float(b) for b in v) if k == "beta_knots" else v) for k, v in doc.items()}
    kw.setdefault("population", cfg.population)
    kw.setdefault("n_days", (cfg.end_date - cfg.epoch).days + 1)
    kw.setdefault("delay_mean", cfg.delay_mean)
    kw.setdefault("delay_sd", cfg.delay_sd)
    return Scenario(feeds=feeds, horizon=cfg.horizon, t0=cfg.epoch, **kw)


def _write_long(path: Path, region: str, start: date, counts) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(("region", "date", "count"))
        for i, c in enumerate(counts):
            w.writerow((region, date.fromordinal(start.toordinal() + i).isoformat(), int(c)))


def cmd_simulate(cfg: RunConfig, params: Path) -> dict[str, Path]:
    """Synthetic feeds from known parameters, plus the forecast-window truth."""
    if not Path(params).exists():
        raise DataError(f"params file {params} not found")
    try:
        doc = read_json(params)
    except ValueError as exc:
        raise DataError(f"{params}: {exc}") from None
    try:
        scenario = scenario_from_params(doc, cfg)
        syn = generate(scenario, spawn_rng(cfg.seed, STREAM_SIMULATE))
    except KeyError as exc:
        raise ConfigError(f"params: missing {exc}") from None
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"params: {exc}") from None
    cfg.out.mkdir(parents=True, exist_ok=True)
    paths = {}
    for name, s in syn.bundle.series.items():
        paths[name] = cfg.out / f"{name}.csv"
        _write_long(paths[name], cfg.region, s.start, s.values)
    paths["truth"] = cfg.out / "truth.csv"
    _write_long(paths["truth"], cfg.region, syn.bundle.end.fromordinal(
        syn.bundle.end.toordinal() + 1), syn.future_deaths)
    paths["manifest"] = cfg.out / "simulation.json"
    write_json(paths["manifest"], {
        "command": "simulate", "seed": cfg.seed, "region": cfg.region,
        "epoch": cfg.epoch.isoformat(), "data_end": syn.bundle.end.isoformat(),
        "params": doc, "expected_future_deaths": [float(v) for v in syn.future_mean],
        "files": {k: p.name for k, p in paths.items()}})
    return paths


# argument handling -------------------------------------------------------------------

def _feeds_arg(text: str) -> tuple[str, ...]:
    return tuple(f.strip() for f in text.split(",") if f.strip())


def _candidate_arg(text: str) -> tuple[str, Path]:
    name, sep, path = text.partition("=")
    if not sep or not name or not path:
        raise argparse.ArgumentTypeError("expected NAME=PATH")
    return name, Path(path)


def _date_arg(text: str) -> date:
    try:
        return date.fromisoformat(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected YYYY-MM-DD, got {text!r}") from None


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="epifuse", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", required=True, type=Path, help="run config (TOML)")
        p.add_argument("--seed", type=int, help="root seed")
        p.add_argument("--out", type=Path, help="output directory")
        return p

    def data_opts(p):
        p.add_argument("--feeds", type=_feeds_arg, help="active feeds, e.g. deaths,twitter")
        p.add_argument("--end-date", type=_date_arg, help="last day of data used")
        return p

    common(sub.add_parser("classify", help="tweets -> daily symptomatic counts JSON"))

    p = data_opts(common(sub.add_parser("fit", help="sample the posterior")))
    p.add_argument("--chains", type=int)
    p.add_argument("--draws", type=int, help="iterations per chain, burn-in included")
    p.add_argument("--burn-in", type=int)
    p.add_argument("--thin", type=int)
    p.add_argument("--covariance", choices=("diagonal", "full", "fixed"))
    p.add_argument("--jobs", type=int, default=1, help="chains run in parallel")

    p = data_opts(common(sub.add_parser("forecast", help="posterior predictive deaths")))
    p.add_argument("--posterior", type=Path, help="default: OUT/posterior.csv")
    p.add_argument("--horizon", type=int)

    p = common(sub.add_parser("evaluate", help="MAE and NEES table"))
    p.add_argument("--baseline", type=Path, required=True, help="deaths-only forecast CSV")
    p.add_argument("--candidate", type=_candidate_arg, action="append", default=[],
                   metavar="NAME=PATH", help="forecast with extra feeds; repeatable")
    p.add_argument("--truth", type=Path, required=True, help="region,date,count CSV")

    p = common(sub.add_parser("simulate", help="synthetic feeds from known parameters"))
    p.add_argument("--params", type=Path, required=True, help="parameters JSON")
    p.add_argument("--horizon", type=int)
    return parser


def _configure(args) -> RunConfig:
    cfg = configmod.load(args.config)
    sampler = None
    if args.command == "fit":
        sampler = dict(n_chains=args.chains, n_draws=args.draws, n_burn_in=args.burn_in,
                       thin=args.thin, covariance=args.covariance)
    return cfg.with_overrides(
        sampler, seed=args.seed, out=args.out, active_feeds=getattr(args, "feeds", None),
        end_date=getattr(args, "end_date", None), horizon=getattr(args, "horizon", None))


def run(args) -> None:
    cfg = _configure(args)
    if args.command == "classify":
        out = cmd_classify(cfg)
    elif args.command == "fit":
        if args.jobs < 1:
            raise ConfigError("--jobs must be at least 1")
        out = cmd_fit(cfg, jobs=args.jobs)["manifest"]
    elif args.command == "forecast":
        out = cmd_forecast(cfg, args.posterior)
    elif args.command == "evaluate":
        names = [n for n, _ in args.candidate]
        if len(set(names)) != len(names):
            raise ConfigError("candidate names must be unique")
        out = cmd_evaluate(cfg, args.baseline, dict(args.candidate), args.truth)
    else:
        out = cmd_simulate(cfg, args.params)["manifest"]
    print(out)


def main(argv: Sequence[str] | None = None) -> int:
    level = os.environ.get("EPIFUSE_LOG", "WARNING").upper()
    if not isinstance(logging.getLevelName(level), int):
        print(f"epifuse: error: EPIFUSE_LOG={level!r} is not a log level", file=sys.stderr)
        return ConfigError.exit_code
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")
    args = build_parser().parse_args(argv)
    try:
        run(args)
    except EpifuseError as exc:
        print(f"epifuse: error: {exc}", file=sys.stderr)
        return exc.exit_code
    return 0


if __name__ == "__main__":
    sys.exit(main())
