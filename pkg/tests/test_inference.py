import math
from datetime import date, timedelta

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import stats
from scipy.special import expit

from epifuse.errors import ChainFailure, NumericalError
from epifuse.inference import (
    DEATHS,
    DataBundle,
    FusionModel,
    ModelParams,
    PosteriorSamples,
    Priors,
    SamplerConfig,
    ess,
    fit,
    posterior_predictive,
    rhat,
    run_chain,
    sample,
)
from epifuse.inference.export import (
    read_forecast_csv,
    read_posterior_csv,
    write_forecast_csv,
    write_posterior_csv,
)
from epifuse.inference.forecast import ForecastResult
from epifuse.inference.sampler import laplace_covariance
from epifuse.inference.transforms import inverse_stick_breaking, stick_breaking
from epifuse.observation import DeathLink, FeedLink
from epifuse.series import DateSeries
from epifuse.synthetic import Scenario, generate
from epifuse.transmission import TransmissionParams, simulate

T0 = date(2020, 3, 1)


def empty_model(n_days=14, priors=Priors()):
    return FusionModel(DataBundle(T0, 1e5, {}, n_days=n_days), priors)


def small_synthetic(n_days=42, seed=0):
    sc = Scenario(population=1e5, n_days=n_days, seed=20.0, t0=T0,
                  beta_knots=tuple(np.full(-(-n_days // 7), 0.5)))
    return generate(sc, np.random.default_rng(seed))


def numeric_log_jacobian(model, theta, h=1e-6):
    """log|det| of d(constrained)/d(theta) with the simplex reduced to its free part."""
    def reduced(th):
        v = model.constrained_vector(th)
        keep = np.ones(v.size, dtype=bool)
        i = 5 + model.n_knots
        for _ in model.feeds:
            keep[i + 1 + model.feed_lags] = False  # last lag weight is implied
            i += model.feed_lags + 3
        return v[keep]

    d = theta.size
    jac = np.empty((d, d))
    for j in range(d):
        e = np.zeros(d)
        e[j] = h
        jac[:, j] = (reduced(theta + e) - reduced(theta - e)) / (2 * h)
    return np.linalg.slogdet(jac)[1]


# transforms ---------------------------------------------------------------

@settings(max_examples=50, deadline=None)
@given(st.lists(st.floats(-5, 5), min_size=1, max_size=25))
def test_stick_breaking_round_trip(y):
    y = np.array(y)
    x, _ = stick_breaking(y)
    assert x.sum() == pytest.approx(1.0, abs=1e-12)
    assert np.all(x > 0)
    np.testing.assert_allclose(inverse_stick_breaking(x), y, atol=1e-10)


def test_stick_breaking_zero_is_uniform():
    x, _ = stick_breaking(np.zeros(4))
    np.testing.assert_allclose(x, np.full(5, 0.2), atol=1e-15)


def test_pack_unpack_round_trip():
    data = small_synthetic()
    bundle = DataBundle(data.bundle.t0, data.bundle.population,
                        {**data.bundle.series,
                         "tests": DateSeries(data.bundle.t0, np.ones(42))})
    model = FusionModel(bundle)
    rng = np.random.default_rng(1)
    for _ in range(20):
        theta = model.initial_point() + rng.normal(0, 0.5, model.dim)
        np.testing.assert_allclose(model.pack(model.unpack(theta)), theta, atol=1e-10)
        back = model.from_constrained_vector(model.constrained_vector(theta))
        np.testing.assert_allclose(back, theta, atol=1e-8)


# log posterior --------------------------------------------------------------

def test_flat_prior_empty_data_is_jacobian_only():
    model = FusionModel(DataBundle(T0, 1e5, {"tests": DateSeries(T0, np.zeros(7), np.zeros(7, bool))}),
                        Priors(flat=True))
    rng = np.random.default_rng(2)
    for _ in range(5):
        theta = model.initial_point() + rng.normal(0, 0.3, model.dim)
        lp = model.log_density(theta)
        assert lp == pytest.approx(model.log_jacobian(theta), rel=1e-12)
        assert lp == pytest.approx(numeric_log_jacobian(model, theta), abs=1e-5)


def test_prior_terms_match_scipy():
    model = empty_model(21)
    params = ModelParams(
        TransmissionParams(1e5, 7.0, [0.3, 0.2, 0.25], 3.5, 6.0),
        DeathLink(0.02, model.delay, 12.0))
    theta = model.pack(params)
    lb = np.log([0.3, 0.2, 0.25])
    expected = (
        stats.lognorm(s=1.0, scale=10.0).logpdf(7.0)
        + stats.norm(math.log(0.25), 0.5).logpdf(lb[0])
        + stats.norm(0, 0.2).logpdf(np.diff(lb)).sum()
        - lb.sum()  # random walk lives on log beta
        + stats.gamma(a=16, scale=0.25).logpdf(3.5)
        + stats.gamma(a=25, scale=0.2).logpdf(6.0)
        + stats.beta(1, 99).logpdf(0.02)
        + stats.expon(scale=10).logpdf(12.0))
    assert model.log_prior(params) == pytest.approx(expected, rel=1e-12)
    assert model.log_density(theta) == pytest.approx(expected + model.log_jacobian(theta),
                                                     rel=1e-12)


def test_feed_prior_terms_match_scipy():
    series = {"tests": DateSeries(T0, np.zeros(7), np.zeros(7, bool))}
    model = FusionModel(DataBundle(T0, 1e5, series), feed_lags=3)
    w = np.array([0.4, 0.3, 0.2, 0.1])
    params = ModelParams(TransmissionParams(1e5, 10.0, [0.25], 4.0, 5.0),
                         DeathLink(0.01, model.delay, 10.0),
                         {"tests": FeedLink(0.5, w, 4.0)})
    base = empty_model(7).log_prior(ModelParams(params.transmission, params.deaths))
    expected = (base + stats.lognorm(s=1.0).logpdf(0.5)
                + stats.dirichlet(np.ones(4)).logpdf(w) + stats.expon(scale=10).logpdf(4.0))
    assert model.log_prior(params) == pytest.approx(expected, rel=1e-12)


def test_one_feed_two_days_hand_sum():
    counts = np.array([0.0, 3.0])
    model = FusionModel(DataBundle(T0, 1e5, {"tests": DateSeries(T0, counts)}), feed_lags=2)
    trans = TransmissionParams(1e5, 500.0, [0.4], 4.0, 5.0)
    w = np.array([0.5, 0.3, 0.2])
    params = ModelParams(trans, DeathLink(0.01, model.delay, 10.0),
                         {"tests": FeedLink(0.2, w, 6.0)})
    theta = model.pack(params)
    i_new = simulate(trans, T0, 1).i_new.values
    mu1 = 0.2 * w[0] * i_new[1]
    p = 6.0 / (6.0 + mu1)
    like = 0.0 + stats.nbinom(6.0, p).logpmf(3)  # day 0 has zero mean and zero count
    expected = model.log_prior(params) + model.log_jacobian(theta) + like
    assert model.log_density(theta) == pytest.approx(expected, rel=1e-12)


def test_deaths_likelihood_matches_scipy():
    data = small_synthetic()
    model = FusionModel(data.bundle)
    params = data.params
    deaths = data.bundle.series[DEATHS].values
    i_new = simulate(params.transmission, T0, 41).i_new.values
    mean = params.deaths.ifr * np.convolve(i_new, model.delay.probs)[:42]
    phi = params.deaths.phi
    expected = 0.0
    for k, mu in zip(deaths, mean):
        expected += (0.0 if mu == 0 and k == 0 else
                     stats.nbinom(phi, phi / (phi + mu)).logpmf(k))
    assert model.log_likelihood(params) == pytest.approx(expected, rel=1e-10)


def test_duplicated_series_doubles_likelihood():
    rng = np.random.default_rng(3)
    counts = rng.poisson(20, 30).astype(float)
    link_w = np.r_[1.0, np.zeros(21)]
    one = FusionModel(DataBundle(T0, 1e5, {"a": DateSeries(T0, counts)}))
    two = FusionModel(DataBundle(T0, 1e5, {"a": DateSeries(T0, counts),
                                           "b": DateSeries(T0, counts)}))
    trans = TransmissionParams(1e5, 50.0, np.full(5, 0.4), 4.0, 5.0)
    deaths = DeathLink(0.01, one.delay, 10.0)
    link = FeedLink(0.05, link_w, 8.0)
    ll1 = one.log_likelihood(ModelParams(trans, deaths, {"a": link}))
    ll2 = two.log_likelihood(ModelParams(trans, deaths, {"a": link, "b": link}))
    assert ll2 == pytest.approx(2 * ll1, rel=1e-12)


def test_kernel_matches_reference_path():
    data = small_synthetic()
    bundle = DataBundle(T0, 1e5, {**data.bundle.series,
                                  "tests": DateSeries(T0, np.arange(42.0))})
    model = FusionModel(bundle)
    rng = np.random.default_rng(4)
    for _ in range(10):
        theta = model.initial_point() + rng.normal(0, 0.3, model.dim)
        a, b = model.log_density(theta), model.log_density_reference(theta)
        assert a == pytest.approx(b, rel=1e-10)


def test_log_density_rejects_bad_points():
    model = empty_model()
    theta = model.initial_point()
    assert model.log_density(theta[:-1]) == -math.inf
    bad = theta.copy()
    bad[0] = np.nan
    assert model.log_density(bad) == -math.inf
    bad[0] = 50.0  # seed beyond the population
    assert model.log_density(bad) == -math.inf


def test_find_mode_improves_density():
    data = small_synthetic()
    model = FusionModel(data.bundle)
    x0 = model.initial_point()
    mode = model.find_mode()
    assert model.log_density(mode) > model.log_density(x0)


# sampler ---------------------------------------------------------------------

MEAN = np.array([1.0, -2.0])
COV = np.array([[1.0, 0.6], [0.6, 2.0]])
PREC = np.linalg.inv(COV)


def gaussian(x):
    d = x - MEAN
    return -0.5 * d @ PREC @ d


@pytest.fixture(scope="module")
def gaussian_run():
    cfg = SamplerConfig(n_chains=6, n_draws=11000, n_burn_in=1000, seed=11,
                        initial_proposal_sd=0.5)
    starts = [MEAN + np.random.default_rng(c).normal(0, 1, 2) for c in range(6)]
    return cfg, sample(cfg, gaussian, starts, ("a", "b"))


def test_gaussian_target_moments(gaussian_run):
    _, post = gaussian_run
    flat = post.flat()
    assert flat.shape == (60000, 2)
    np.testing.assert_allclose(flat.mean(0), MEAN, atol=0.1)
    np.testing.assert_allclose(np.cov(flat.T), COV, rtol=0.15)
    assert np.all(post.rhat < 1.01)
    assert np.all((post.acceptance > 0.1) & (post.acceptance < 0.5))


def test_chains_are_uncorrelated(gaussian_run):
    _, post = gaussian_run
    a = post.draws[:, :, 0]
    for i in range(6):
        for j in range(i + 1, 6):
            assert abs(np.corrcoef(a[i], a[j])[0, 1]) < 0.05


def test_sampler_is_deterministic():
    cfg = SamplerConfig(n_chains=2, n_draws=300, n_burn_in=100, seed=5)
    a = run_chain(cfg, 1, gaussian, MEAN)
    b = run_chain(cfg, 1, gaussian, MEAN)
    c = run_chain(cfg, 0, gaussian, MEAN)
    np.testing.assert_array_equal(a.draws, b.draws)
    assert not np.array_equal(a.draws, c.draws)


def test_parallel_chains_match_serial():
    cfg = SamplerConfig(n_chains=2, n_draws=200, n_burn_in=50, seed=6)
    starts = [MEAN, MEAN + 1]
    serial = sample(cfg, gaussian, starts, ("a", "b"), jobs=1)
    parallel = sample(cfg, gaussian, starts, ("a", "b"), jobs=2)
    np.testing.assert_array_equal(serial.draws, parallel.draws)


def test_full_and_fixed_covariance_modes():
    for mode, cov in (("full", None), ("fixed", COV)):
        cfg = SamplerConfig(n_draws=6000, n_burn_in=1000, seed=7, covariance=mode)
        r = run_chain(cfg, 0, gaussian, MEAN, proposal_cov=cov)
        np.testing.assert_allclose(r.draws.mean(0), MEAN, atol=0.2)
        assert 0.1 < r.acceptance_rate < 0.5


def test_thinning_keeps_draw_count():
    cfg = SamplerConfig(n_draws=100, n_burn_in=20, seed=8, thin=3)
    r = run_chain(cfg, 0, gaussian, MEAN)
    assert r.draws.shape == (80, 2)


def test_fixed_mode_needs_initial_covariance():
    with pytest.raises(ValueError):
        run_chain(SamplerConfig(covariance="fixed"), 0, gaussian, MEAN)


def test_chain_failure_on_stuck_chain():
    def spike(x):
        return 0.0 if np.all(x == 0) else -1e9

    cfg = SamplerConfig(n_draws=200, n_burn_in=100)
    with pytest.raises(ChainFailure):
        run_chain(cfg, 0, spike, np.zeros(2))


def test_non_finite_start_is_reported():
    with pytest.raises(ChainFailure, match="initial point"):
        run_chain(SamplerConfig(n_draws=10, n_burn_in=5), 0, lambda x: -math.inf, np.zeros(2))


def test_config_validation():
    for kw in ({"n_chains": 0}, {"n_burn_in": 10, "n_draws": 10}, {"covariance": "dense"},
               {"target_acceptance": 1.0}, {"thin": 0}):
        with pytest.raises(ValueError):
            SamplerConfig(**kw)


def test_laplace_covariance_of_gaussian():
    np.testing.assert_allclose(laplace_covariance(gaussian, MEAN), COV, rtol=1e-4)


def test_seird_posterior_acceptance_in_range():
    data = small_synthetic()
    model = FusionModel(data.bundle)
    post = fit(model, SamplerConfig(n_chains=2, n_draws=1500, n_burn_in=500, seed=1))
    assert np.all((post.acceptance >= 0.1) & (post.acceptance <= 0.5))


def test_prior_only_run_recovers_prior_quantiles():
    model = empty_model(14)
    cfg = SamplerConfig(n_chains=4, n_draws=8000, n_burn_in=1000, seed=9,
                        covariance="full", initial_proposal_sd=0.3)
    starts = [model.initial_point() for _ in range(4)]
    post = sample(cfg, model, starts, model.param_names)
    ifr = expit(post.column("logit_ifr").ravel())
    d_i = np.exp(post.column("log_infectious_period").ravel())
    levels = np.array([0.1, 0.5, 0.9])
    # evaluate the sample quantiles under the true prior CDF
    ifr_levels = stats.beta(1, 99).cdf(np.quantile(ifr, levels))
    di_levels = stats.gamma(a=25, scale=0.2).cdf(np.quantile(d_i, levels))
    np.testing.assert_allclose(ifr_levels, levels, atol=0.04)
    np.testing.assert_allclose(di_levels, levels, atol=0.04)


# diagnostics -------------------------------------------------------------------

def test_rhat_constant_chains_is_one():
    assert rhat(np.ones((4, 100))) == 1.0


def test_rhat_same_distribution():
    rng = np.random.default_rng(12)
    assert rhat(rng.standard_normal((6, 5000))) < 1.01


def test_rhat_detects_offset_chain():
    rng = np.random.default_rng(13)
    x = rng.standard_normal((6, 1000))
    x[0] += 10
    assert rhat(x) > 2


def test_rhat_needs_two_chains():
    with pytest.raises(ValueError):
        rhat(np.zeros((1, 100)))


def test_rhat_split_catches_trend():
    x = np.tile(np.linspace(0, 10, 1000), (4, 1))
    assert rhat(x) > 1.5


def test_ess_independent_draws_near_total():
    rng = np.random.default_rng(14)
    e = ess(rng.standard_normal((4, 2000)))
    assert 0.8 * 8000 < e < 1.2 * 8000


def test_ess_ar1_matches_theory():
    rng = np.random.default_rng(15)
    rho, n, m = 0.9, 20000, 4
    x = np.empty((m, n))
    x[:, 0] = rng.standard_normal(m)
    eps = rng.standard_normal((m, n)) * math.sqrt(1 - rho**2)
    for t in range(1, n):
        x[:, t] = rho * x[:, t - 1] + eps[:, t]
    theory = m * n * (1 - rho) / (1 + rho)
    assert ess(x) == pytest.approx(theory, rel=0.2)


def test_ess_vectorised_shape():
    rng = np.random.default_rng(16)
    assert ess(rng.standard_normal((3, 100, 5))).shape == (5,)


# posterior predictive ------------------------------------------------------------

def _samples_at(model, thetas):
    thetas = np.atleast_2d(thetas)
    return PosteriorSamples(model.param_names, thetas[None], np.ones(1), 0)


def test_single_draw_forecast_equals_death_mean():
    data = small_synthetic()
    model = FusionModel(data.bundle)
    theta = model.pack(data.params)
    fc = posterior_predictive(_samples_at(model, theta), model, horizon=7)
    full = simulate(data.params.transmission, T0, 41 + 7).i_new.values
    expected = data.params.deaths.ifr * np.convolve(full, model.delay.probs)[:49][42:]
    np.testing.assert_allclose(fc.expected, expected, rtol=1e-12)
    assert fc.dates[0] == T0 + timedelta(days=42)
    assert fc.horizon == 7


def test_forecast_variance_total_variance():
    # many copies of two parameter values: Var = E[Var | draw] + Var[E | draw]
    data = small_synthetic()
    model = FusionModel(data.bundle)
    th = model.pack(data.params)
    th2 = th.copy()
    th2[1:1 + model.n_knots] += 0.05
    thetas = np.array([th, th2] * 20000)
    fc = posterior_predictive(_samples_at(model, thetas), model, horizon=3, seed=1)
    phi = data.params.deaths.phi
    mus = fc.draw_means[:2]
    within = (mus + mus**2 / phi).mean(0)
    between = mus.var(0)
    np.testing.assert_allclose(fc.mean, mus.mean(0), rtol=0.02)
    np.testing.assert_allclose(fc.variance, within + between, rtol=0.05)


def test_forecast_drops_failed_draws():
    data = small_synthetic()
    model = FusionModel(data.bundle)
    th = model.pack(data.params)
    bad = th.copy()
    bad[0] = 40.0  # seed above the population cannot be simulated
    ok = posterior_predictive(_samples_at(model, np.array([th] * 200 + [bad])), model)
    assert ok.n_dropped == 1 and ok.samples.shape[0] == 200
    with pytest.raises(NumericalError):
        posterior_predictive(_samples_at(model, np.array([th] * 20 + [bad])), model)


def test_forecast_result_summaries():
    s = np.arange(20.0).reshape(10, 2)
    fc = ForecastResult(T0, s, s)
    lo, hi = fc.interval(0.8)
    assert np.all(lo < fc.mean) and np.all(fc.mean < hi)
    assert ForecastResult(T0, s[:1], s[:1]).variance.tolist() == [0.0, 0.0]


# export -------------------------------------------------------------------------

def test_posterior_csv_round_trip(tmp_path):
    data = small_synthetic()
    bundle = DataBundle(T0, 1e5, {**data.bundle.series,
                                  "tests": DateSeries(T0, np.ones(42))})
    model = FusionModel(bundle)
    rng = np.random.default_rng(17)
    draws = model.initial_point() + rng.normal(0, 0.2, (2, 5, model.dim))
    post = PosteriorSamples(model.param_names, draws, np.ones(2), 0)
    path = tmp_path / "posterior.csv"
    write_posterior_csv(path, post, model)
    back = read_posterior_csv(path, model)
    np.testing.assert_allclose(back.draws, draws, atol=1e-8)
    assert path.read_text().splitlines()[0] == "chain,draw,parameter,value"


def test_posterior_csv_rejects_wrong_layout(tmp_path):
    path = tmp_path / "p.csv"
    path.write_text("chain,draw,parameter,value\n0,0,mystery,1.0\n")
    with pytest.raises(ValueError):
        read_posterior_csv(path, empty_model())


def test_forecast_csv_round_trip(tmp_path):
    rng = np.random.default_rng(18)
    s = rng.poisson(30, (500, 7)).astype(float)
    fc = ForecastResult(T0, s, s)
    path = tmp_path / "f.csv"
    write_forecast_csv(path, fc)
    rows = read_forecast_csv(path)
    assert list(rows) == fc.dates
    first = rows[T0]
    assert first["mean"] == fc.mean[0]
    assert first["variance"] == fc.variance[0]
    assert first["q0.5"] == np.quantile(s[:, 0], 0.5)
