from datetime import date, timedelta

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import stats

from epifuse.observation import (
    DeathLink,
    DelayPmf,
    FeedLink,
    death_mean,
    feed_mean,
    log_likelihood,
    log_likelihood_terms,
    nb_loglik_sum,
    negbin_logpmf,
    negbin_sample,
)
from epifuse.series import DateSeries
from epifuse.transmission import TransmissionParams, simulate

T0 = date(2020, 2, 17)


def brute_lagged(x, w):
    out = []
    for t in range(len(x)):
        out.append(sum(w[l] * x[t - l] for l in range(len(w)) if t - l >= 0))
    return np.array(out)


def series(values, start=T0):
    return DateSeries(start, np.asarray(values, dtype=float))


class TestDelayPmf:
    def test_discretized_gamma_is_simplex(self):
        d = DelayPmf.discretized_gamma(21, 8, 60)
        assert d.max_lag == 60
        assert d.probs.sum() == pytest.approx(1.0, abs=1e-12)
        assert 19 < d.mean < 22

    def test_rejects_non_simplex(self):
        with pytest.raises(ValueError):
            DelayPmf(np.array([0.5, 0.4]))
        with pytest.raises(ValueError):
            DelayPmf(np.ones(62) / 62)


class TestMeans:
    def test_zero_infections_zero_deaths(self):
        link = DeathLink(0.01, DelayPmf.discretized_gamma(), 10.0)
        assert np.all(death_mean(series(np.zeros(30)), link).values == 0.0)

    def test_identity_delay(self):
        link = DeathLink(0.01, DelayPmf.point_mass(0), 10.0)
        d = death_mean(series(np.full(5, 1000.0)), link)
        np.testing.assert_allclose(d.values, 10.0)

    def test_hand_convolution(self):
        link = DeathLink(0.5, DelayPmf(np.array([0.0, 0.5, 0.5])), 10.0)
        d = death_mean(series([10.0, 20.0, 30.0]), link)
        np.testing.assert_allclose(d.values, [0.0, 2.5, 7.5])

    def test_feed_kappa_zero(self):
        link = FeedLink(0.0, np.array([0.3, 0.7]), 5.0)
        assert np.all(feed_mean(series(np.arange(10.0)), link).values == 0.0)

    def test_feed_pure_scaling(self):
        x = np.arange(10.0) ** 2
        link = FeedLink(2.0, np.array([1.0]), 5.0)
        np.testing.assert_allclose(feed_mean(series(x), link).values, 2 * x)

    def test_feed_lags_zero_and_seven(self):
        w = np.zeros(8)
        w[0] = w[7] = 0.5
        ramp = np.arange(14.0)
        got = feed_mean(series(ramp), FeedLink(1.0, w, 5.0)).values
        np.testing.assert_allclose(got, brute_lagged(ramp, w))
        assert got[3] == 1.5
        assert got[10] == 0.5 * 10 + 0.5 * 3

    @given(st.lists(st.floats(0, 1e5), min_size=1, max_size=40),
           st.floats(0, 100))
    def test_linearity(self, x, a):
        link = FeedLink(1.7, np.array([0.2, 0.3, 0.5]), 5.0)
        lhs = feed_mean(series(a * np.asarray(x)), link).values
        rhs = a * feed_mean(series(x), link).values
        np.testing.assert_allclose(lhs, rhs, rtol=1e-9, atol=1e-6)

    @settings(max_examples=30)
    @given(st.lists(st.floats(0, 1e4), min_size=1, max_size=30))
    def test_death_mass_bound(self, x):
        delay = DelayPmf.discretized_gamma(10, 4, 30)
        link = DeathLink(0.02, delay, 5.0)
        short = death_mean(series(x), link).values.sum()
        assert short <= 0.02 * sum(x) * (1 + 1e-9) + 1e-9
        padded = np.concatenate([x, np.zeros(30)])
        full = death_mean(series(padded), link).values.sum()
        assert full == pytest.approx(0.02 * sum(x), rel=1e-9, abs=1e-9)


class TestNegBin:
    def test_point_mass_at_zero(self):
        assert negbin_logpmf(0, 0.0, 3.0) == 0.0
        assert negbin_logpmf(2, 0.0, 3.0) == -np.inf

    def test_matches_scipy_parameterisation(self):
        k = np.arange(60)
        mu, phi = 7.3, 2.4
        ref = stats.nbinom.logpmf(k, phi, phi / (phi + mu))
        np.testing.assert_allclose(negbin_logpmf(k, mu, phi), ref, rtol=1e-10)

    def test_normalisation(self):
        k = np.arange(2000)
        total = np.exp(negbin_logpmf(k, 5.0, 2.0)).sum()
        assert abs(total - 1.0) < 1e-8

    def test_poisson_limit(self):
        k = np.arange(41)
        got = negbin_logpmf(k, 10.0, 1e8)
        np.testing.assert_allclose(got, stats.poisson.logpmf(k, 10.0), atol=1e-4)

    def test_large_counts_finite(self):
        v = negbin_logpmf(10_000_000, 9.9e6, 50.0)
        assert np.isfinite(v) and v < 0

    @pytest.mark.parametrize("k,mu,phi", [(-1, 1.0, 1.0), (1, -1.0, 1.0),
                                          (1, 1.0, 0.0), (1.5, 1.0, 1.0)])
    def test_rejects_invalid(self, k, mu, phi):
        with pytest.raises(ValueError):
            negbin_logpmf(k, mu, phi)

    @given(st.floats(0.5, 200), st.floats(0.1, 100))
    def test_decreasing_beyond_mode(self, mu, phi):
        k = np.arange(int(mu) + 2, int(mu) + 80)
        lp = negbin_logpmf(k, mu, phi)
        assert np.all(np.diff(lp) < 0)

    def test_kernel_agrees_with_vectorised(self):
        rng = np.random.default_rng(3)
        counts = rng.integers(0, 50, 30).astype(float)
        means = rng.uniform(0.5, 40, 30)
        mask = rng.random(30) < 0.7
        ref = negbin_logpmf(counts[mask], means[mask], 3.3).sum()
        assert nb_loglik_sum(counts, means, mask, 3.3) == pytest.approx(ref, rel=1e-12)

    def test_sample_zero_mean(self):
        rng = np.random.default_rng(0)
        assert np.all(negbin_sample(rng, 0.0, 2.0, size=1000) == 0)
        assert negbin_sample(rng, 0.0, 2.0) == 0

    def test_sample_moments(self):
        rng = np.random.default_rng(1)
        x = negbin_sample(rng, 50.0, 5.0, size=100_000)
        assert abs(x.mean() - 50.0) < 1.0
        assert abs(x.var(ddof=1) - 550.0) < 40.0

    def test_sample_poisson_limit(self):
        rng = np.random.default_rng(2)
        x = negbin_sample(rng, 3.0, 1e8, size=100_000)
        assert abs(x.var(ddof=1) / x.mean() - 1.0) < 0.05

    def test_sample_deterministic(self):
        a = negbin_sample(np.random.default_rng(9), 20.0, 3.0, size=50)
        b = negbin_sample(np.random.default_rng(9), 20.0, 3.0, size=50)
        np.testing.assert_array_equal(a, b)


def _traj(days=40):
    p = TransmissionParams(1e5, 20.0, (0.6, 0.5, 0.3), 4.0, 5.0)
    return simulate(p, T0, days)


class TestLogLikelihood:
    def test_empty(self):
        assert log_likelihood({}, _traj(), {}) == 0.0

    def test_single_term(self):
        traj = _traj()
        link = FeedLink(0.1, np.array([1.0]), 4.0)
        day = T0 + timedelta(days=20)
        obs = {"tests": series([37.0], start=day)}
        mu = 0.1 * traj.i_new.values[20]
        assert log_likelihood(obs, traj, {"tests": link}) == pytest.approx(
            negbin_logpmf(37, mu, 4.0), rel=1e-12)

    def test_two_feeds_three_days_brute_force(self):
        traj = _traj()
        dl = DeathLink(0.05, DelayPmf.discretized_gamma(8, 3, 20), 6.0)
        fl = FeedLink(0.2, np.array([0.5, 0.25, 0.25]), 3.0)
        start = T0 + timedelta(days=30)
        obs = {"deaths": series([3, 5, 4], start), "twitter": series([80, 95, 70], start)}
        dm, fm = death_mean(traj.i_new, dl).values, feed_mean(traj.i_new, fl).values
        expected = 0.0
        for i in range(3):
            expected += stats.nbinom.logpmf(obs["deaths"].values[i], 6.0,
                                            6.0 / (6.0 + dm[30 + i]))
            expected += stats.nbinom.logpmf(obs["twitter"].values[i], 3.0,
                                            3.0 / (3.0 + fm[30 + i]))
        got = log_likelihood(obs, traj, {"deaths": dl, "twitter": fl})
        assert got == pytest.approx(expected, rel=1e-10)

    def test_additive_over_feeds(self):
        traj = _traj()
        links = {"deaths": DeathLink(0.05, DelayPmf.point_mass(5), 6.0),
                 "tests": FeedLink(0.2, np.array([1.0]), 3.0)}
        obs = {"deaths": series(np.arange(31) % 7, T0 + timedelta(days=10)),
               "tests": series(np.arange(41))}
        terms = log_likelihood_terms(obs, traj, links)
        full = log_likelihood(obs, traj, links)
        only_deaths = log_likelihood({"deaths": obs["deaths"]}, traj, links)
        assert full - only_deaths == pytest.approx(terms["tests"], rel=1e-12)

    def test_missing_days_skipped(self):
        traj = _traj()
        link = FeedLink(0.1, np.array([1.0]), 4.0)
        observed = np.array([False, True, False])
        obs = {"tests": DateSeries(T0 + timedelta(days=10), np.array([999.0, 5.0, 999.0]),
                                   observed)}
        mu = 0.1 * traj.i_new.values[11]
        assert log_likelihood(obs, traj, {"tests": link}) == pytest.approx(
            negbin_logpmf(5, mu, 4.0))

    def test_misaligned_series_is_error(self):
        traj = _traj(10)
        link = FeedLink(0.1, np.array([1.0]), 4.0)
        with pytest.raises(ValueError):
            log_likelihood({"tests": series(np.ones(5), T0 - timedelta(days=1))},
                           traj, {"tests": link})
        with pytest.raises(ValueError):
            log_likelihood({"tests": series(np.ones(12))}, traj, {"tests": link})
