"""Joint posterior over transmission and observation parameters.

The sampler works on an unconstrained vector ``theta``; :class:`FusionModel`
owns the layout, the transforms back to :class:`ModelParams`, the priors and
the likelihood.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from datetime import date, timedelta
from typing import Mapping

import numpy as np
from scipy.optimize import minimize
from numba import njit
from scipy.special import expit, gammaln

from ..observation import DEFAULT_FEED_LAGS, DeathLink, DelayPmf, FeedLink, nb_loglik_sum
from ..series import DateSeries
from ..transmission import KNOT_DAYS, SUBSTEPS_PER_DAY, TransmissionParams, _simulate
from .transforms import inverse_stick_breaking, stick_breaking

DEATHS = "deaths"
_LOG_2PI = math.log(2 * math.pi)


@njit(cache=True)
def _stick_breaking(y):
    k = y.shape[0]
    w = np.empty(k + 1)
    remaining = 1.0
    log_jac = 0.0
    for i in range(k):
        z = 1.0 / (1.0 + math.exp(-(y[i] - math.log(k - i))))
        w[i] = remaining * z
        log_jac += math.log(z) + math.log1p(-z) + math.log(remaining)
        remaining -= w[i]
    w[k] = remaining
    return w, log_jac


@njit(cache=True)
def _lagged(x, w, scale):
    n = x.shape[0]
    out = np.zeros(n)
    for t in range(n):
        acc = 0.0
        for l in range(min(w.shape[0], t + 1)):
            acc += w[l] * x[t - l]
        out[t] = scale * acc
    return out


@njit(cache=True)
def _nlpdf(x, mean, sd):
    z = (x - mean) / sd
    return -0.5 * _LOG_2PI - math.log(sd) - 0.5 * z * z


@njit(cache=True)
def _density_kernel(theta, n_knots, feed_lags, n_feeds, population, horizon, substeps,
                    hyper, flat, delay, has_deaths, death_counts, death_mask,
                    feed_counts, feed_masks):
    b1 = 1 + n_knots
    seed = math.exp(theta[0])
    if not seed < population:
        return -np.inf
    betas = np.exp(theta[1:b1])
    latent = math.exp(theta[b1])
    infectious = math.exp(theta[b1 + 1])
    ifr = 1.0 / (1.0 + math.exp(-theta[b1 + 2]))
    phi_d = math.exp(theta[b1 + 3])
    if not (0.0 < ifr < 1.0) or phi_d <= 0.0 or phi_d == np.inf:
        return -np.inf
    lp = theta[0] + theta[b1] + theta[b1 + 1] + math.log(ifr) + math.log1p(-ifr) + theta[b1 + 3]
    for k in range(n_knots):
        lp += theta[1 + k]
    kappas = np.empty(n_feeds)
    phis = np.empty(n_feeds)
    weights = np.empty((n_feeds, feed_lags + 1))
    for f in range(n_feeds):
        i = b1 + 4 + f * (feed_lags + 2)
        kappas[f] = math.exp(theta[i])
        w, sj = _stick_breaking(theta[i + 1:i + 1 + feed_lags])
        weights[f] = w
        phis[f] = math.exp(theta[i + 1 + feed_lags])
        lp += theta[i] + sj + theta[i + 1 + feed_lags]
        if phis[f] <= 0.0 or phis[f] == np.inf or kappas[f] == np.inf:
            return -np.inf

    if not flat:
        # hyper: beta0 mean/sd, walk sd, latent mean/sd, infectious mean/sd,
        # ifr mean/concentration, kappa log mean/sd, lag concentration,
        # phi mean, seed median/log sd
        lp += _nlpdf(theta[0], math.log(hyper[13]), hyper[14]) - theta[0]
        lp += _nlpdf(theta[1], hyper[0], hyper[1])
        for k in range(1, n_knots):
            lp += _nlpdf(theta[1 + k] - theta[k], 0.0, hyper[2])
        for k in range(n_knots):
            lp -= theta[1 + k]
        for x, m, s in ((latent, hyper[3], hyper[4]), (infectious, hyper[5], hyper[6])):
            shape = (m / s) ** 2
            rate = m / (s * s)
            lp += shape * math.log(rate) - math.lgamma(shape) + (shape - 1) * math.log(x) - rate * x
        a = hyper[7] * hyper[8]
        b = (1 - hyper[7]) * hyper[8]
        lp += (math.lgamma(a + b) - math.lgamma(a) - math.lgamma(b)
               + (a - 1) * math.log(ifr) + (b - 1) * math.log1p(-ifr))
        rate = 1.0 / hyper[12]
        lp += math.log(rate) - rate * phi_d
        n_lags = feed_lags + 1
        alpha = hyper[11]
        for f in range(n_feeds):
            lk = math.log(kappas[f])
            lp += _nlpdf(lk, hyper[9], hyper[10]) - lk
            lp += math.lgamma(n_lags * alpha) - n_lags * math.lgamma(alpha)
            if alpha != 1.0:
                for l in range(n_lags):
                    lp += (alpha - 1) * math.log(weights[f, l])
            lp += math.log(rate) - rate * phis[f]

    if not (lp > -np.inf):
        return -np.inf
    if not has_deaths and n_feeds == 0:
        return lp

    s = _simulate(population, seed, betas, 2.0 / latent, 2.0 / infectious,
                  horizon, substeps)[:, 0]
    inew = np.zeros(horizon + 1)
    for t in range(1, horizon + 1):
        d = s[t - 1] - s[t]
        inew[t] = d if d > 0.0 else 0.0
    if has_deaths:
        lp += nb_loglik_sum(death_counts, _lagged(inew, delay, ifr), death_mask, phi_d)
    for f in range(n_feeds):
        if lp == -np.inf:
            break
        lp += nb_loglik_sum(feed_counts[f], _lagged(inew, weights[f], kappas[f]),
                            feed_masks[f], phis[f])
    if lp != lp:
        return -np.inf
    return lp


@dataclass(frozen=True)
class Priors:
    """Prior hyperparameters. ``flat=True`` drops every prior density but
    keeps the change-of-variables Jacobians."""

    flat: bool = False
    log_beta0_mean: float = math.log(0.25)
    log_beta0_sd: float = 0.5
    beta_walk_sd: float = 0.2
    latent_mean: float = 4.0
    latent_sd: float = 1.0
    infectious_mean: float = 5.0
    infectious_sd: float = 1.0
    ifr_mean: float = 0.01
    ifr_concentration: float = 100.0
    kappa_log_mean: float = 0.0
    kappa_log_sd: float = 1.0
    lag_concentration: float = 1.0
    phi_mean: float = 10.0
    seed_median: float = 10.0
    seed_log_sd: float = 1.0

    def hyper_vector(self) -> np.ndarray:
        return np.array([
            self.log_beta0_mean, self.log_beta0_sd, self.beta_walk_sd,
            self.latent_mean, self.latent_sd, self.infectious_mean, self.infectious_sd,
            self.ifr_mean, self.ifr_concentration, self.kappa_log_mean, self.kappa_log_sd,
            self.lag_concentration, self.phi_mean, self.seed_median, self.seed_log_sd,
        ])

    @classmethod
    def from_dict(cls, d: Mapping) -> "Priors":
        return cls(**{k: (bool(v) if k == "flat" else float(v)) for k, v in d.items()})


def _normal_lpdf(x, mean, sd):
    return -0.5 * _LOG_2PI - math.log(sd) - 0.5 * ((x - mean) / sd) ** 2


def _gamma_lpdf(x, mean, sd):
    shape = (mean / sd) ** 2
    rate = mean / sd ** 2
    return shape * math.log(rate) - math.lgamma(shape) + (shape - 1) * math.log(x) - rate * x


def _lognormal_lpdf(x, log_mean, log_sd):
    return _normal_lpdf(math.log(x), log_mean, log_sd) - math.log(x)


@dataclass(frozen=True)
class ModelParams:
    transmission: TransmissionParams
    deaths: DeathLink
    feeds: Mapping[str, FeedLink] = field(default_factory=dict)

    def links(self) -> dict:
        return {DEATHS: self.deaths, **self.feeds}


@dataclass(frozen=True, eq=False)
class DataBundle:
    """Observed series on a shared daily calendar starting at the model epoch.

    Day ``t`` of every series lines up with trajectory day ``t``; unobserved
    days are skipped by the likelihood.
    """

    t0: date
    population: float
    series: Mapping[str, DateSeries] = field(default_factory=dict)
    n_days: int | None = None

    def __post_init__(self):
        lengths = {len(s) for s in self.series.values()}
        n = self.n_days
        if n is None:
            if len(lengths) != 1:
                raise ValueError("n_days is required when series are absent or ragged")
            n = lengths.pop()
        object.__setattr__(self, "n_days", int(n))
        for name, s in self.series.items():
            if s.start != self.t0 or len(s) != n:
                raise ValueError(
                    f"series {name!r} covers {s.start}..{s.end}; expected "
                    f"{self.t0} with {n} days")
        if n < 2:
            raise ValueError("need at least two days")
        if not self.population > 0:
            raise ValueError("population must be positive")

    @property
    def end(self) -> date:
        return self.t0 + timedelta(days=self.n_days - 1)

    @property
    def feeds(self) -> tuple[str, ...]:
        return tuple(k for k in self.series if k != DEATHS)


class FusionModel:
    """Posterior for one region given deaths plus any number of extra feeds."""

    def __init__(self, data: DataBundle, priors: Priors = Priors(),
                 delay: DelayPmf | None = None, feed_lags: int = DEFAULT_FEED_LAGS,
                 substeps: int = SUBSTEPS_PER_DAY):
        self.data = data
        self.priors = priors
        self.delay = delay if delay is not None else DelayPmf.discretized_gamma()
        self.feed_lags = int(feed_lags)
        self.substeps = int(substeps)
        self.horizon = data.n_days - 1
        self.n_knots = math.ceil(data.n_days / KNOT_DAYS)
        self.feeds = data.feeds
        self._layout()
        self._counts = {}
        for name, s in data.series.items():
            counts = np.ascontiguousarray(s.values, dtype=float)
            if np.any(counts[s.observed] < 0) or np.any(counts != np.round(counts)):
                raise ValueError(f"series {name!r} must hold non-negative integer counts")
            self._counts[name] = (counts, np.ascontiguousarray(s.observed))
        n = data.n_days
        self._hyper = priors.hyper_vector()
        self._has_deaths = DEATHS in self._counts
        self._death_counts, self._death_mask = self._counts.get(
            DEATHS, (np.zeros(n), np.zeros(n, dtype=bool)))
        self._feed_counts = np.zeros((len(self.feeds), n))
        self._feed_masks = np.zeros((len(self.feeds), n), dtype=bool)
        for j, f in enumerate(self.feeds):
            self._feed_counts[j], self._feed_masks[j] = self._counts[f]

    # layout -------------------------------------------------------------
    def _layout(self):
        names = ["log_seed"]
        names += [f"log_beta[{k}]" for k in range(self.n_knots)]
        names += ["log_latent_period", "log_infectious_period", "logit_ifr", "log_phi[deaths]"]
        self._feed_slices = {}
        for f in self.feeds:
            start = len(names)
            names.append(f"log_kappa[{f}]")
            names += [f"lag_stick[{f}][{j}]" for j in range(self.feed_lags)]
            names.append(f"log_phi[{f}]")
            self._feed_slices[f] = start
        self.param_names = tuple(names)
        self.dim = len(names)
        self._b0 = 1
        self._b1 = 1 + self.n_knots

    def constrained_names(self) -> list[str]:
        names = ["seed"] + [f"beta[{k}]" for k in range(self.n_knots)]
        names += ["latent_period", "infectious_period", "ifr", "phi[deaths]"]
        for f in self.feeds:
            names.append(f"kappa[{f}]")
            names += [f"lag_weight[{f}][{j}]" for j in range(self.feed_lags + 1)]
            names.append(f"phi[{f}]")
        return names

    # transforms ---------------------------------------------------------
    def unpack(self, theta) -> ModelParams:
        theta = np.asarray(theta, dtype=float)
        b1 = self._b1
        trans = TransmissionParams(
            population=self.data.population,
            initial_seed=math.exp(theta[0]),
            beta_knots=np.exp(theta[self._b0:b1]),
            latent_period=math.exp(theta[b1]),
            infectious_period=math.exp(theta[b1 + 1]),
        )
        deaths = DeathLink(float(expit(theta[b1 + 2])), self.delay, math.exp(theta[b1 + 3]))
        feeds = {}
        for f, i in self._feed_slices.items():
            w, _ = stick_breaking(theta[i + 1:i + 1 + self.feed_lags])
            feeds[f] = FeedLink(math.exp(theta[i]), w,
                                math.exp(theta[i + 1 + self.feed_lags]))
        return ModelParams(trans, deaths, feeds)

    def pack(self, params: ModelParams) -> np.ndarray:
        t = params.transmission
        theta = [math.log(t.initial_seed), *np.log(t.beta_knots),
                 math.log(t.latent_period), math.log(t.infectious_period),
                 math.log(params.deaths.ifr) - math.log1p(-params.deaths.ifr),
                 math.log(params.deaths.phi)]
        if len(t.beta_knots) != self.n_knots:
            raise ValueError(f"expected {self.n_knots} beta knots")
        for f in self.feeds:
            link = params.feeds[f]
            if link.lag_weights.size != self.feed_lags + 1:
                raise ValueError(f"feed {f!r} needs {self.feed_lags + 1} lag weights")
            theta += [math.log(link.kappa), *inverse_stick_breaking(link.lag_weights),
                      math.log(link.phi)]
        return np.array(theta)

    def constrained_vector(self, theta) -> np.ndarray:
        p = self.unpack(theta)
        t = p.transmission
        out = [t.initial_seed, *t.beta_knots, t.latent_period, t.infectious_period,
               p.deaths.ifr, p.deaths.phi]
        for f in self.feeds:
            link = p.feeds[f]
            out += [link.kappa, *link.lag_weights, link.phi]
        return np.array(out)

    def from_constrained_vector(self, values) -> np.ndarray:
        v = np.asarray(values, dtype=float)
        k = self.n_knots
        trans = TransmissionParams(self.data.population, v[0], v[1:1 + k], v[1 + k], v[2 + k])
        deaths = DeathLink(v[3 + k], self.delay, v[4 + k])
        feeds, i = {}, 5 + k
        for f in self.feeds:
            w = v[i + 1:i + 2 + self.feed_lags]
            feeds[f] = FeedLink(v[i], w / w.sum(), v[i + 2 + self.feed_lags])
            i += self.feed_lags + 3
        return self.pack(ModelParams(trans, deaths, feeds))

    # density ------------------------------------------------------------
    def log_jacobian(self, theta) -> float:
        theta = np.asarray(theta, dtype=float)
        b1 = self._b1
        lj = theta[0] + theta[self._b0:b1].sum() + theta[b1] + theta[b1 + 1] + theta[b1 + 3]
        ifr = expit(theta[b1 + 2])
        lj += math.log(ifr) + math.log1p(-ifr) if 0 < ifr < 1 else -math.inf
        for i in self._feed_slices.values():
            _, sj = stick_breaking(theta[i + 1:i + 1 + self.feed_lags])
            lj += theta[i] + sj + theta[i + 1 + self.feed_lags]
        return float(lj)

    def log_prior(self, params: ModelParams) -> float:
        """Prior density of the constrained parameters (no Jacobian)."""
        pr = self.priors
        if pr.flat:
            return 0.0
        t = params.transmission
        log_beta = np.log(t.beta_knots)
        lp = _lognormal_lpdf(t.initial_seed, math.log(pr.seed_median), pr.seed_log_sd)
        lp += _normal_lpdf(log_beta[0], pr.log_beta0_mean, pr.log_beta0_sd)
        steps = np.diff(log_beta)
        lp += float(np.sum(-0.5 * _LOG_2PI - math.log(pr.beta_walk_sd)
                           - 0.5 * (steps / pr.beta_walk_sd) ** 2))
        lp -= float(log_beta.sum())
        lp += _gamma_lpdf(t.latent_period, pr.latent_mean, pr.latent_sd)
        lp += _gamma_lpdf(t.infectious_period, pr.infectious_mean, pr.infectious_sd)
        a = pr.ifr_mean * pr.ifr_concentration
        b = (1 - pr.ifr_mean) * pr.ifr_concentration
        w = params.deaths.ifr
        lp += (math.lgamma(a + b) - math.lgamma(a) - math.lgamma(b)
               + (a - 1) * math.log(w) + (b - 1) * math.log1p(-w))
        rate = 1.0 / pr.phi_mean
        lp += math.log(rate) - rate * params.deaths.phi
        alpha = pr.lag_concentration
        n_lags = self.feed_lags + 1
        for f in self.feeds:
            link = params.feeds[f]
            lp += _lognormal_lpdf(link.kappa, pr.kappa_log_mean, pr.kappa_log_sd)
            lp += (gammaln(n_lags * alpha) - n_lags * gammaln(alpha)
                   + (alpha - 1) * float(np.sum(np.log(link.lag_weights))))
            lp += math.log(rate) - rate * link.phi
        return float(lp)

    def i_new(self, params: ModelParams, horizon: int | None = None) -> np.ndarray:
        """Daily new infections for days ``0..horizon`` (entry 0 is zero)."""
        h = self.horizon if horizon is None else horizon
        t = params.transmission
        s = _simulate(t.population, t.initial_seed, t.beta_knots, t.latent_rate,
                      t.infectious_rate, h, self.substeps)[:, 0]
        out = np.zeros(h + 1)
        out[1:] = np.maximum(s[:-1] - s[1:], 0.0)
        return out

    def log_likelihood(self, params: ModelParams) -> float:
        if not self._counts:
            return 0.0
        inew = self.i_new(params)
        if not np.all(np.isfinite(inew)):
            return -math.inf
        n = inew.size
        ll = 0.0
        for name, link in params.links().items():
            if name not in self._counts:
                continue
            counts, mask = self._counts[name]
            if isinstance(link, DeathLink):
                mean = link.ifr * np.convolve(inew, link.delay.probs)[:n]
            else:
                mean = link.kappa * np.convolve(inew, link.lag_weights)[:n]
            ll += nb_loglik_sum(counts, mean, mask, link.phi)
            if ll == -math.inf:
                break
        return float(ll)

    def log_density(self, theta) -> float:
        """Unnormalised log posterior in unconstrained space.

        Returns ``-inf`` for any point that cannot be evaluated rather than
        raising, so the sampler simply rejects it.
        """
        theta = np.ascontiguousarray(theta, dtype=float)
        if theta.shape != (self.dim,) or not np.all(np.isfinite(theta)):
            return -math.inf
        return float(_density_kernel(
            theta, self.n_knots, self.feed_lags, len(self.feeds),
            float(self.data.population), self.horizon, self.substeps, self._hyper,
            self.priors.flat, self.delay.probs, self._has_deaths, self._death_counts,
            self._death_mask, self._feed_counts, self._feed_masks))

    def log_density_reference(self, theta) -> float:
        """Same density assembled from the public building blocks (slow path)."""
        theta = np.asarray(theta, dtype=float)
        with np.errstate(all="ignore"):
            try:
                params = self.unpack(theta)
                lp = self.log_jacobian(theta) + self.log_prior(params)
                if not math.isfinite(lp):
                    return -math.inf
                lp += self.log_likelihood(params)
            except (ValueError, OverflowError, ZeroDivisionError):
                return -math.inf
        return lp if math.isfinite(lp) else -math.inf

    __call__ = log_density

    # initialisation -----------------------------------------------------
    def initial_point(self) -> np.ndarray:
        """Prior-centred starting point."""
        pr = self.priors
        k = self.n_knots
        trans = TransmissionParams(self.data.population,
                                   min(pr.seed_median, 0.5 * self.data.population),
                                   np.full(k, math.exp(pr.log_beta0_mean)),
                                   pr.latent_mean, pr.infectious_mean)
        deaths = DeathLink(pr.ifr_mean, self.delay, pr.phi_mean)
        w = np.full(self.feed_lags + 1, 1.0 / (self.feed_lags + 1))
        feeds = {f: FeedLink(math.exp(pr.kappa_log_mean), w, pr.phi_mean)
                 for f in self.feeds}
        return self.pack(ModelParams(trans, deaths, feeds))

    def find_mode(self, x0=None, maxiter: int = 2000) -> np.ndarray:
        """Local posterior mode by L-BFGS-B with finite-difference gradients."""
        x = self.initial_point() if x0 is None else np.asarray(x0, dtype=float)

        def objective(th):
            v = self.log_density(th)
            return -v if math.isfinite(v) else 1e300

        best = x
        for _ in range(3):
            res = minimize(objective, best, method="L-BFGS-B",
                           options={"maxiter": maxiter, "maxfun": 50 * maxiter})
            improved = res.fun < objective(best) - 1e-6
            if math.isfinite(res.fun) and res.fun < 1e299:
                best = res.x
            if not improved:
                break
        return best


def log_posterior(theta, model: FusionModel) -> float:
    return model.log_density(theta)
