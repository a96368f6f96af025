"""Observation model: expected daily counts and the negative-binomial likelihood.

Every observed series links to the daily new-infection series through a
lagged weighted sum. Deaths use a fixed infection-to-death delay scaled by the
infection fatality ratio; each low-latency feed has its own reporting scale
and lag weights. Counts are NegativeBinomial(mean, phi) with
``Var = mean + mean**2 / phi``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Mapping, Union

import numpy as np
from numba import njit
from scipy import stats
from scipy.special import gammaln, xlogy

from .series import DateSeries
from .transmission import Trajectory

MAX_DELAY = 60
DEFAULT_FEED_LAGS = 21


def _check_simplex(p: np.ndarray, what: str):
    if p.ndim != 1 or p.size == 0:
        raise ValueError(f"{what} must be a non-empty vector")
    if np.any(p < 0) or abs(p.sum() - 1.0) > 1e-9:
        raise ValueError(f"{what} must be non-negative and sum to 1")


@dataclass(frozen=True, eq=False)
class DelayPmf:
    probs: np.ndarray

    def __post_init__(self):
        p = np.ascontiguousarray(self.probs, dtype=float)
        _check_simplex(p, "delay pmf")
        if p.size - 1 > MAX_DELAY:
            raise ValueError(f"delay support may not exceed {MAX_DELAY} days")
        object.__setattr__(self, "probs", p)

    @property
    def max_lag(self) -> int:
        return self.probs.size - 1

    @property
    def mean(self) -> float:
        return float(np.arange(self.probs.size) @ self.probs)

    @classmethod
    def point_mass(cls, lag: int = 0) -> "DelayPmf":
        p = np.zeros(lag + 1)
        p[lag] = 1.0
        return cls(p)

    @classmethod
    def discretized_gamma(cls, mean: float = 21.0, sd: float = 8.0,
                          max_lag: int = MAX_DELAY) -> "DelayPmf":
        """Gamma mass on ``[l - 1/2, l + 1/2)`` per integer lag, renormalised."""
        shape = (mean / sd) ** 2
        dist = stats.gamma(shape, scale=mean / shape)
        edges = np.concatenate([[0.0], np.arange(max_lag + 1) + 0.5])
        p = np.diff(dist.cdf(edges))
        return cls(p / p.sum())


@dataclass(frozen=True, eq=False)
class FeedLink:
    kappa: float
    lag_weights: np.ndarray
    phi: float

    def __post_init__(self):
        w = np.ascontiguousarray(self.lag_weights, dtype=float)
        _check_simplex(w, "lag_weights")
        object.__setattr__(self, "lag_weights", w)
        if not self.kappa >= 0:
            raise ValueError("kappa must be non-negative")
        if not self.phi > 0:
            raise ValueError("phi must be positive")


@dataclass(frozen=True, eq=False)
class DeathLink:
    ifr: float
    delay: DelayPmf
    phi: float

    def __post_init__(self):
        if not 0 < self.ifr < 1:
            raise ValueError("ifr must lie in (0, 1)")
        if not self.phi > 0:
            raise ValueError("phi must be positive")


Link = Union[DeathLink, FeedLink]


def lagged_sum(x: np.ndarray, weights: np.ndarray) -> np.ndarray:
    """``y[t] = sum_l weights[l] * x[t - l]`` with ``x`` zero before its start."""
    x = np.asarray(x, dtype=float)
    return np.convolve(x, weights)[: x.size]


def death_mean(i_new: DateSeries, link: DeathLink) -> DateSeries:
    return DateSeries(i_new.start, link.ifr * lagged_sum(i_new.values, link.delay.probs))


def feed_mean(i_new: DateSeries, link: FeedLink) -> DateSeries:
    return DateSeries(i_new.start, link.kappa * lagged_sum(i_new.values, link.lag_weights))


def expected_counts(i_new: DateSeries, link: Link) -> DateSeries:
    if isinstance(link, DeathLink):
        return death_mean(i_new, link)
    return feed_mean(i_new, link)


def _validate_nb(k, mean, phi):
    if np.any(phi <= 0) or np.any(np.isnan(phi)):
        raise ValueError("phi must be positive")
    if np.any(mean < 0) or np.any(np.isnan(mean)):
        raise ValueError("mean must be non-negative")
    if k is not None and (np.any(k < 0) or np.any(k != np.floor(k))):
        raise ValueError("counts must be non-negative integers")


def negbin_logpmf(k, mean, phi):
    """Log pmf of NegativeBinomial(mean, phi); ``mean == 0`` is a point mass at 0."""
    k_arr = np.asarray(k, dtype=float)
    mu = np.asarray(mean, dtype=float)
    ph = np.asarray(phi, dtype=float)
    _validate_nb(k_arr, mu, ph)
    with np.errstate(divide="ignore", invalid="ignore"):
        out = (gammaln(k_arr + ph) - gammaln(ph) - gammaln(k_arr + 1.0)
               - ph * np.log1p(mu / ph)
               + xlogy(k_arr, mu) - xlogy(k_arr, ph + mu))
    out = np.where(mu == 0, np.where(k_arr == 0, 0.0, -np.inf), out)
    return float(out) if out.ndim == 0 else out


def negbin_sample(rng: np.random.Generator, mean, phi, size=None):
    """Gamma-Poisson mixture draw."""
    mu = np.asarray(mean, dtype=float)
    ph = np.asarray(phi, dtype=float)
    _validate_nb(None, mu, ph)
    rate = rng.gamma(ph, mu / ph, size=size)
    draws = rng.poisson(rate)
    return int(draws) if np.ndim(draws) == 0 else draws


@njit(cache=True)
def nb_loglik_sum(counts, means, mask, phi):
    """Sum of NB log pmf terms over masked days; the sampler's hot path."""
    total = 0.0
    lg_phi = math.lgamma(phi)
    for t in range(counts.shape[0]):
        if not mask[t]:
            continue
        k = counts[t]
        mu = means[t]
        if mu <= 0.0:
            if k == 0.0:
                continue
            return -np.inf
        total += (math.lgamma(k + phi) - lg_phi - math.lgamma(k + 1.0)
                  - phi * math.log1p(mu / phi)
                  + k * (math.log(mu) - math.log(phi + mu)))
    return total


def _window(series: DateSeries, traj: Trajectory) -> slice:
    lo = (series.start - traj.t0).days
    hi = lo + len(series)
    if lo < 0 or hi > traj.horizon + 1:
        raise ValueError(
            f"series {series.start}..{series.end} is not inside the trajectory "
            f"window {traj.t0}..{traj.i_new.end}")
    return slice(lo, hi)


def log_likelihood_terms(obs: Mapping[str, DateSeries], traj: Trajectory,
                         links: Mapping[str, Link]) -> dict[str, float]:
    """Per-feed summed log-likelihood over observed days."""
    terms = {}
    for name, series in obs.items():
        if name not in links:
            raise KeyError(f"no observation link for feed {name!r}")
        window = _window(series, traj)
        mean = expected_counts(traj.i_new, links[name]).values[window]
        mask = series.observed
        if not mask.any():
            terms[name] = 0.0
            continue
        terms[name] = float(np.sum(negbin_logpmf(series.values[mask], mean[mask],
                                                 links[name].phi)))
    return terms


def log_likelihood(obs: Mapping[str, DateSeries], traj: Trajectory,
                   links: Mapping[str, Link]) -> float:
    return float(sum(log_likelihood_terms(obs, traj, links).values()))
