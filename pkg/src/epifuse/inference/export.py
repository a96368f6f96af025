"""CSV and JSON artifacts for fits and forecasts.

The posterior file is long-form (``chain, draw, parameter, value``) with
constrained parameter values written at full precision, so a model built on
the same data can rebuild the unconstrained draws exactly enough to forecast.
"""
from __future__ import annotations

import csv
import json
import math
from datetime import date
from pathlib import Path

import numpy as np

from .forecast import ForecastResult
from .model import FusionModel
from .sampler import PosteriorSamples

FORECAST_QUANTILES = (0.025, 0.05, 0.25, 0.5, 0.75, 0.95, 0.975)
POSTERIOR_HEADER = ("chain", "draw", "parameter", "value")


def _qname(q: float) -> str:
    return f"q{q:g}"


def write_posterior_csv(path, samples: PosteriorSamples, model: FusionModel) -> None:
    names = model.constrained_names()
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(POSTERIOR_HEADER)
        for c in range(samples.n_chains):
            for j, theta in enumerate(samples.draws[c]):
                for name, v in zip(names, model.constrained_vector(theta)):
                    w.writerow((c, j, name, repr(float(v))))


def read_posterior_csv(path, model: FusionModel, n_burn_in: int = 0) -> PosteriorSamples:
    """Inverse of :func:`write_posterior_csv` for a model with the same layout."""
    names = model.constrained_names()
    index = {n: i for i, n in enumerate(names)}
    values: dict[tuple[int, int], np.ndarray] = {}
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if tuple(reader.fieldnames or ()) != POSTERIOR_HEADER:
            raise ValueError(f"{path}: expected header {','.join(POSTERIOR_HEADER)}")
        for row in reader:
            name = row["parameter"]
            if name not in index:
                raise ValueError(f"{path}: parameter {name!r} does not match the model layout")
            key = (int(row["chain"]), int(row["draw"]))
            vec = values.setdefault(key, np.full(len(names), np.nan))
            vec[index[name]] = float(row["value"])
    if not values:
        raise ValueError(f"{path}: no posterior draws")
    n_chains = 1 + max(k[0] for k in values)
    n_draws = 1 + max(k[1] for k in values)
    if len(values) != n_chains * n_draws:
        raise ValueError(f"{path}: ragged chains")
    draws = np.empty((n_chains, n_draws, model.dim))
    for (c, j), vec in values.items():
        if np.isnan(vec).any():
            raise ValueError(f"{path}: chain {c} draw {j} is missing parameters")
        draws[c, j] = model.from_constrained_vector(vec)
    return PosteriorSamples(model.param_names, draws, np.full(n_chains, np.nan), n_burn_in)


def forecast_rows(fc: ForecastResult, quantiles=FORECAST_QUANTILES) -> list[dict]:
    qs = fc.quantiles(list(quantiles))
    mean, var = fc.mean, fc.variance
    rows = []
    for i, day in enumerate(fc.dates):
        row = {"date": day.isoformat(), "mean": float(mean[i]), "variance": float(var[i]),
               "sd": math.sqrt(float(var[i]))}
        for q, vals in zip(quantiles, qs):
            row[_qname(q)] = float(vals[i])
        rows.append(row)
    return rows


def write_forecast_csv(path, fc: ForecastResult, quantiles=FORECAST_QUANTILES) -> None:
    rows = forecast_rows(fc, quantiles)
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=list(rows[0]))
        w.writeheader()
        for row in rows:
            w.writerow({k: (v if isinstance(v, str) else repr(v)) for k, v in row.items()})


def read_forecast_csv(path) -> dict[date, dict[str, float]]:
    """Forecast summaries keyed by date."""
    out = {}
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        missing = {"date", "mean", "variance"} - set(reader.fieldnames or ())
        if missing:
            raise ValueError(f"{path}: missing columns {sorted(missing)}")
        for row in reader:
            day = date.fromisoformat(row.pop("date"))
            out[day] = {k: float(v) for k, v in row.items()}
    return out


def diagnostics(samples: PosteriorSamples) -> dict:
    return {
        "parameters": list(samples.param_names),
        "rhat": [None if not np.isfinite(v) else float(v) for v in samples.rhat],
        "ess": [None if not np.isfinite(v) else float(v) for v in samples.ess],
        "acceptance": [float(a) for a in samples.acceptance],
        "max_rhat": float(np.nanmax(samples.rhat)) if np.isfinite(samples.rhat).any() else None,
        "min_ess": float(np.nanmin(samples.ess)) if np.isfinite(samples.ess).any() else None,
    }


def write_json(path, payload: dict) -> None:
    Path(path).write_text(json.dumps(payload, indent=2, sort_keys=True, default=str) + "\n")


def read_json(path) -> dict:
    return json.loads(Path(path).read_text())
