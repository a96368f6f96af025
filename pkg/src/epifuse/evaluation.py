"""Forecast accuracy (MAE) and consistency (NEES) metrics, plus the
region-by-feed comparison table built from them."""
from __future__ import annotations

import csv
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np


def _pair(pred, truth) -> tuple[np.ndarray, np.ndarray]:
    x = np.asarray(pred, dtype=float).ravel()
    y = np.asarray(truth, dtype=float).ravel()
    if x.size == 0:
        raise ValueError("need at least one prediction")
    if x.shape != y.shape:
        raise ValueError(f"length mismatch: {x.size} predictions vs {y.size} truths")
    return x, y


def mae(pred, truth) -> float:
    """Mean absolute error."""
    x, y = _pair(pred, truth)
    return float(np.mean(np.abs(x - y)))


def mae_pct_diff(baseline_mae: float, candidate_mae: float) -> float:
    """Percentage change in MAE relative to the baseline; negative is better."""
    if not baseline_mae > 0:
        raise ValueError("baseline MAE must be positive")
    return 100.0 * (candidate_mae - baseline_mae) / baseline_mae


def nees(pred_mean, pred_var, truth) -> float:
    """Normalised estimation error squared for scalar daily predictions.

    Values near 1 mean the reported variances match the realised errors;
    above 1 the forecast is overconfident, below 1 overcautious.
    """
    x, y = _pair(pred_mean, truth)
    c = np.asarray(pred_var, dtype=float).ravel()
    if c.shape != x.shape:
        raise ValueError(f"length mismatch: {c.size} variances vs {x.size} predictions")
    if np.any(~(c > 0)):
        raise ValueError("variances must be positive")
    return float(np.mean((x - y) ** 2 / c))


@dataclass(frozen=True)
class Forecast:
    """Per-day predictive mean and variance on a shared set of days."""

    mean: np.ndarray
    variance: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "mean", np.asarray(self.mean, dtype=float))
        object.__setattr__(self, "variance", np.asarray(self.variance, dtype=float))
        if self.mean.shape != self.variance.shape:
            raise ValueError("mean and variance must have the same length")


@dataclass
class TableRow:
    region: str
    baseline_mae: float
    baseline_nees: float
    mae_pct: dict[str, float] = field(default_factory=dict)
    nees: dict[str, float] = field(default_factory=dict)


def compare(region: str, baseline: Forecast, candidates: Mapping[str, Forecast],
            truth) -> TableRow:
    """One table row: baseline NEES and per-feed MAE change and NEES."""
    base_mae = mae(baseline.mean, truth)
    row = TableRow(region, base_mae, nees(baseline.mean, baseline.variance, truth))
    for name, fc in candidates.items():
        row.mae_pct[name] = mae_pct_diff(base_mae, mae(fc.mean, truth))
        row.nees[name] = nees(fc.mean, fc.variance, truth)
    return row


def average_row(rows: Sequence[TableRow], label: str = "Average") -> TableRow:
    """Column means over regions; feeds missing from a region are skipped."""
    if not rows:
        raise ValueError("no rows to average")
    feeds = sorted({f for r in rows for f in r.mae_pct})
    out = TableRow(label, float(np.mean([r.baseline_mae for r in rows])),
                   float(np.mean([r.baseline_nees for r in rows])))
    for f in feeds:
        out.mae_pct[f] = float(np.mean([r.mae_pct[f] for r in rows if f in r.mae_pct]))
        out.nees[f] = float(np.mean([r.nees[f] for r in rows if f in r.nees]))
    return out


def table_header(feeds: Sequence[str]) -> list[str]:
    cols = ["region", "baseline_mae", "baseline_nees"]
    for f in feeds:
        cols += [f"{f}_mae_pct_diff", f"{f}_nees"]
    return cols


def write_table_csv(path, rows: Sequence[TableRow], feeds: Sequence[str] | None = None,
                    with_average: bool = True) -> None:
    if feeds is None:
        feeds = sorted({f for r in rows for f in r.mae_pct})
    rows = list(rows)
    if with_average and len(rows) > 1:
        rows.append(average_row(rows))
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(table_header(feeds))
        for r in rows:
            line = [r.region, f"{r.baseline_mae:.6g}", f"{r.baseline_nees:.6g}"]
            for f in feeds:
                line += ([f"{r.mae_pct[f]:.6g}", f"{r.nees[f]:.6g}"] if f in r.mae_pct
                         else ["", ""])
            w.writerow(line)


def read_table_csv(path) -> list[dict[str, str]]:
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))
