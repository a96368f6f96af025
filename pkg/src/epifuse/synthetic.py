"""Synthetic surveillance data from known parameters.

simulate -> expected counts per feed -> negative-binomial noise. The days
after the data window are returned separately as forecast ground truth, with
the contact rate held at its last knot.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from datetime import date, timedelta

import numpy as np

from .inference.model import DEATHS, DataBundle, ModelParams
from .observation import DeathLink, DelayPmf, FeedLink, expected_counts, negbin_sample
from .series import DateSeries
from .transmission import KNOT_DAYS, TransmissionParams, simulate

EPOCH = date(2020, 2, 17)


@dataclass(frozen=True)
class SyntheticData:
    bundle: DataBundle
    params: ModelParams
    i_new: np.ndarray          # days 0..n_days-1+horizon
    future_deaths: np.ndarray  # observed deaths over the forecast window
    future_mean: np.ndarray    # expected deaths over the forecast window


def default_knots(n_days: int = 120, growth_weeks: int = 7, early: float = 0.55,
                  low: float = 0.2, late: float = 0.5) -> np.ndarray:
    """Growth, a three-week ramp down to suppression, then resurgence over the
    last four weeks."""
    n_knots = -(-n_days // KNOT_DAYS)
    knots = np.empty(n_knots)
    for k in range(n_knots):
        if k < growth_weeks:
            knots[k] = early
        elif k < growth_weeks + 3:
            knots[k] = early + (low - early) * (k - growth_weeks + 1) / 3
        elif k < n_knots - 4:
            knots[k] = low
        else:
            knots[k] = late
    return knots


@dataclass(frozen=True)
class Scenario:
    population: float = 1e6
    n_days: int = 120
    seed: float = 10.0
    beta_knots: tuple = field(default_factory=lambda: tuple(default_knots(120)))
    latent_period: float = 4.0
    infectious_period: float = 5.0
    ifr: float = 0.01
    phi_deaths: float = 100.0
    delay_mean: float = 21.0
    delay_sd: float = 8.0
    feeds: dict = field(default_factory=dict)
    horizon: int = 7
    t0: date = EPOCH

    def params(self) -> ModelParams:
        trans = TransmissionParams(self.population, self.seed, self.beta_knots,
                                   self.latent_period, self.infectious_period)
        delay = DelayPmf.discretized_gamma(self.delay_mean, self.delay_sd)
        return ModelParams(trans, DeathLink(self.ifr, delay, self.phi_deaths),
                           dict(self.feeds))


def generate(scenario: Scenario, rng: np.random.Generator) -> SyntheticData:
    params = scenario.params()
    total = scenario.n_days - 1 + scenario.horizon
    traj = simulate(params.transmission, scenario.t0, total)
    series = {}
    future = None
    future_mean = None
    for name, link in params.links().items():
        mean = expected_counts(traj.i_new, link).values
        counts = np.asarray(negbin_sample(rng, mean, link.phi), dtype=float)
        series[name] = DateSeries(scenario.t0, counts[:scenario.n_days])
        if name == DEATHS:
            future = counts[scenario.n_days:]
            future_mean = mean[scenario.n_days:]
    bundle = DataBundle(scenario.t0, scenario.population, series)
    return SyntheticData(bundle, params, traj.i_new.values, future, future_mean)


def feed_link(kappa: float, lag_weights, phi: float) -> FeedLink:
    w = np.asarray(lag_weights, dtype=float)
    return FeedLink(kappa, w / w.sum(), phi)


def end_date(scenario: Scenario) -> date:
    return scenario.t0 + timedelta(days=scenario.n_days - 1)
