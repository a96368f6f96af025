"""Posterior-predictive death forecasts."""
from __future__ import annotations

import logging
from dataclasses import dataclass
from datetime import date, timedelta

import numpy as np

from ..errors import NumericalError
from ..observation import negbin_sample
from .model import FusionModel
from .sampler import STREAM_PREDICTIVE, PosteriorSamples, spawn_rng

log = logging.getLogger(__name__)

MAX_DROPPED_FRACTION = 0.01


@dataclass(frozen=True, eq=False)
class ForecastResult:
    start: date
    samples: np.ndarray     # (n_draws, horizon) predictive counts
    draw_means: np.ndarray  # (n_draws, horizon) expected deaths per draw
    n_dropped: int = 0

    def __post_init__(self):
        if self.samples.ndim != 2 or self.samples.shape[1] < 1:
            raise ValueError("samples must be (n_draws, horizon) with horizon >= 1")

    @property
    def horizon(self) -> int:
        return self.samples.shape[1]

    @property
    def dates(self) -> list[date]:
        return [self.start + timedelta(days=i) for i in range(self.horizon)]

    @property
    def mean(self) -> np.ndarray:
        return self.samples.mean(axis=0)

    @property
    def variance(self) -> np.ndarray:
        if self.samples.shape[0] < 2:
            return np.zeros(self.horizon)
        return self.samples.var(axis=0, ddof=1)

    @property
    def expected(self) -> np.ndarray:
        """Mean of the per-draw expected deaths (no observation noise)."""
        return self.draw_means.mean(axis=0)

    def quantiles(self, q) -> np.ndarray:
        return np.quantile(self.samples, q, axis=0)

    def interval(self, level: float = 0.95) -> tuple[np.ndarray, np.ndarray]:
        tail = (1 - level) / 2
        lo, hi = self.quantiles([tail, 1 - tail])
        return lo, hi


def posterior_predictive(samples: PosteriorSamples, model: FusionModel, horizon: int = 7,
                         seed: int = 0, max_draws: int | None = None) -> ForecastResult:
    """Deaths for the ``horizon`` days after the last data day.

    Each retained draw is simulated through the forecast window with its last
    contact-rate knot held constant, then one negative-binomial count is drawn
    per day.
    """
    if horizon < 1:
        raise ValueError("horizon must be at least one day")
    thetas = samples.flat()
    if thetas.shape[0] == 0:
        raise ValueError("no posterior draws")
    if max_draws is not None and thetas.shape[0] > max_draws:
        idx = np.linspace(0, thetas.shape[0] - 1, max_draws).round().astype(int)
        thetas = thetas[idx]
    rng = spawn_rng(seed, STREAM_PREDICTIVE)
    total = model.horizon + horizon
    n = total + 1
    means, counts = [], []
    dropped = 0
    for theta in thetas:
        with np.errstate(all="ignore"):
            try:
                params = model.unpack(theta)
                inew = model.i_new(params, total)
                link = params.deaths
                mean = link.ifr * np.convolve(inew, link.delay.probs)[:n]
            except (ValueError, OverflowError):
                mean = np.full(n, np.nan)
        future = mean[model.horizon + 1:]
        if not np.all(np.isfinite(future)) or np.any(future < 0):
            dropped += 1
            continue
        means.append(future)
        counts.append(negbin_sample(rng, future, link.phi))
    if dropped > MAX_DROPPED_FRACTION * thetas.shape[0]:
        raise NumericalError(f"{dropped} of {thetas.shape[0]} posterior draws failed to simulate")
    if dropped:
        log.warning("dropped %d posterior draws with failed simulations", dropped)
    start = model.data.end + timedelta(days=1)
    return ForecastResult(start, np.array(counts, dtype=float), np.array(means), dropped)

