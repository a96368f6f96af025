"""Adaptive random-walk Metropolis with burn-in-only adaptation.

During burn-in the per-coordinate proposal scale follows the running standard
deviation of the chain and a global log-scale is tuned by Robbins-Monro toward
the target acceptance rate. After burn-in the kernel is frozen, so retained
draws come from a valid time-homogeneous Metropolis chain.
"""
from __future__ import annotations

import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Callable, Sequence

import numpy as np

from ..errors import ChainFailure
from .diagnostics import ess, rhat

log = logging.getLogger(__name__)

LogDensity = Callable[[np.ndarray], float]

# stream ids for counter-based seed splitting
STREAM_CHAIN = 0
STREAM_INIT = 1
STREAM_PREDICTIVE = 2
STREAM_SIMULATE = 3

# "fixed" keeps the initial proposal shape and tunes only the global scale
COVARIANCE_MODES = ("diagonal", "full", "fixed")


def spawn_rng(seed: int, stream: int, index: int = 0) -> np.random.Generator:
    """Independent generator for ``(seed, stream, index)``."""
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(stream, index)))


@dataclass(frozen=True)
class SamplerConfig:
    n_chains: int = 6
    n_draws: int = 2000
    n_burn_in: int = 1000
    seed: int = 0
    target_acceptance: float = 0.234
    adaptation_decay: float = 0.6
    initial_proposal_sd: float = 0.05
    adapt_start: int = 100
    covariance: str = "diagonal"
    min_acceptance: float = 0.01
    init_jitter: float = 0.05
    thin: int = 1

    def __post_init__(self):
        if self.n_chains < 1:
            raise ValueError("n_chains must be at least 1")
        if not 0 <= self.n_burn_in < self.n_draws:
            raise ValueError("n_burn_in must lie in [0, n_draws)")
        if self.covariance not in COVARIANCE_MODES:
            raise ValueError(f"covariance must be one of {COVARIANCE_MODES}")
        if self.thin < 1:
            raise ValueError("thin must be at least 1")
        if not 0 < self.target_acceptance < 1:
            raise ValueError("target_acceptance must lie in (0, 1)")

    @property
    def n_keep(self) -> int:
        return self.n_draws - self.n_burn_in

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class ChainResult:
    chain_id: int
    draws: np.ndarray
    log_density: np.ndarray
    acceptance_rate: float
    burn_in_acceptance: float
    proposal_scale: np.ndarray


@dataclass
class PosteriorSamples:
    param_names: tuple[str, ...]
    draws: np.ndarray  # (chains, draws, dim), unconstrained
    acceptance: np.ndarray
    n_burn_in: int
    log_density: np.ndarray | None = None
    rhat: np.ndarray = field(init=False)
    ess: np.ndarray = field(init=False)

    def __post_init__(self):
        self.draws = np.asarray(self.draws, dtype=float)
        if self.draws.ndim != 3 or self.draws.shape[2] != len(self.param_names):
            raise ValueError("draws must have shape (chains, draws, len(param_names))")
        if self.n_chains >= 2 and self.draws.shape[1] >= 4:
            self.rhat = rhat(self.draws)
        else:
            self.rhat = np.full(self.draws.shape[2], np.nan)
        self.ess = ess(self.draws) if self.draws.shape[1] >= 4 else np.full(
            self.draws.shape[2], np.nan)

    @property
    def n_chains(self) -> int:
        return self.draws.shape[0]

    @property
    def n_total(self) -> int:
        return self.draws.shape[0] * self.draws.shape[1]

    def flat(self) -> np.ndarray:
        return self.draws.reshape(-1, self.draws.shape[2])

    def column(self, name: str) -> np.ndarray:
        return self.draws[:, :, self.param_names.index(name)]


def run_chain(config: SamplerConfig, chain_id: int, log_density: LogDensity,
              x0: Sequence[float], proposal_cov=None) -> ChainResult:
    """Run one chain of ``config.n_draws`` iterations from ``x0``.

    ``proposal_cov`` seeds the proposal shape (scaled by 2.38/sqrt(d));
    without it the chain starts from ``initial_proposal_sd`` on every axis.
    Deterministic given ``(config.seed, chain_id)``.
    """
    rng = spawn_rng(config.seed, STREAM_CHAIN, chain_id)
    x = np.array(x0, dtype=float)
    d = x.size
    lp = log_density(x)
    if not math.isfinite(lp):
        raise ChainFailure(f"chain {chain_id}: non-finite log density at the initial point")

    base = np.full(d, config.initial_proposal_sd)
    chol = None
    log_scale = 0.0
    empirical_scale = 2.38 / math.sqrt(d)
    if proposal_cov is not None:
        chol = empirical_scale * np.linalg.cholesky(np.asarray(proposal_cov, dtype=float))
    elif config.covariance == "fixed":
        raise ValueError("covariance='fixed' needs an initial proposal_cov")
    adapt_shape = config.covariance != "fixed"
    mean = x.copy()
    m2 = np.zeros(d)
    outer = np.zeros((d, d)) if config.covariance == "full" else None

    n_keep = config.n_keep
    draws = np.empty((n_keep, d))
    lps = np.empty(n_keep)
    accepted_burn = 0
    accepted_keep = 0
    thin = config.thin
    burn_iter = config.n_burn_in * thin
    for i in range(config.n_draws * thin):
        z = rng.standard_normal(d)
        step = chol @ z if chol is not None else base * z
        proposal = x + math.exp(log_scale) * step
        lp_new = log_density(proposal)
        log_u = math.log(rng.random())
        alpha = math.exp(min(0.0, lp_new - lp)) if math.isfinite(lp_new) else 0.0
        if log_u < lp_new - lp:
            x, lp = proposal, lp_new
            if i < burn_iter:
                accepted_burn += 1
            else:
                accepted_keep += 1

        if i < burn_iter:
            n = i + 2  # x0 counts as the first observation
            delta = x - mean
            mean += delta / n
            m2 += delta * (x - mean)
            if outer is not None:
                outer += np.outer(delta, x - mean)
            log_scale += (i + 1) ** -config.adaptation_decay * (alpha - config.target_acceptance)
            if (adapt_shape and i + 1 >= config.adapt_start
                    and (i + 1 - config.adapt_start) % 50 == 0):
                var = m2 / (n - 1) + 1e-12
                if outer is not None:
                    cov = outer / (n - 1) + 1e-12 * np.eye(d)
                    try:
                        chol = empirical_scale * np.linalg.cholesky(cov)
                    except np.linalg.LinAlgError:
                        chol = np.diag(empirical_scale * np.sqrt(var))
                else:
                    base = empirical_scale * np.sqrt(var)
                    chol = None
                if i + 1 == config.adapt_start:
                    # the empirical shape already carries the 2.38/sqrt(d) factor
                    log_scale = 0.0
        elif (i + 1 - burn_iter) % thin == 0:
            j = (i - burn_iter) // thin
            draws[j] = x
            lps[j] = lp

    acc_keep = accepted_keep / (n_keep * thin)
    acc_burn = accepted_burn / burn_iter if burn_iter else float("nan")
    if acc_keep < config.min_acceptance:
        raise ChainFailure(
            f"chain {chain_id}: acceptance {acc_keep:.4f} after adaptation is below "
            f"{config.min_acceptance}; final proposal scale {math.exp(log_scale):.3g}")
    scale = math.exp(log_scale) * (base if chol is None else np.sqrt(np.diag(chol @ chol.T)))
    return ChainResult(chain_id, draws, lps, acc_keep, acc_burn, scale)


def _run_chain_job(args):
    return run_chain(*args)


def sample(config: SamplerConfig, log_density: LogDensity, starts: Sequence[np.ndarray],
           param_names: Sequence[str], jobs: int = 1, proposal_cov=None) -> PosteriorSamples:
    """Run ``len(starts)`` independent chains and gather them."""
    tasks = [(config, c, log_density, starts[c], proposal_cov) for c in range(len(starts))]
    if jobs > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(_run_chain_job, tasks))
    else:
        results = [run_chain(*t) for t in tasks]
    for r in results:
        log.info("chain %d: acceptance %.3f (burn-in %.3f)", r.chain_id,
                 r.acceptance_rate, r.burn_in_acceptance)
    return PosteriorSamples(
        param_names=tuple(param_names),
        draws=np.stack([r.draws for r in results]),
        acceptance=np.array([r.acceptance_rate for r in results]),
        n_burn_in=config.n_burn_in,
        log_density=np.stack([r.log_density for r in results]),
    )


def laplace_covariance(log_density: LogDensity, mode: np.ndarray, step: float = 1e-3,
                       max_var: float = 4.0) -> np.ndarray:
    """Inverse of the negative finite-difference Hessian at ``mode``.

    Eigenvalues are clipped to ``[1e-8, max_var]`` so flat or non-concave
    directions still get a usable proposal scale.
    """
    x = np.asarray(mode, dtype=float)
    d = x.size
    f0 = log_density(x)
    h = np.empty((d, d))
    e = np.eye(d) * step
    fp = np.array([log_density(x + e[i]) for i in range(d)])
    fm = np.array([log_density(x - e[i]) for i in range(d)])
    for i in range(d):
        h[i, i] = (fp[i] - 2 * f0 + fm[i]) / step**2
        for j in range(i):
            fpp = log_density(x + e[i] + e[j])
            fmm = log_density(x - e[i] - e[j])
            # f(x+ei+ej) + f(x-ei-ej) = 2f0 + (Hii + Hjj + 2Hij) step^2 + O(step^4)
            h[i, j] = h[j, i] = ((fpp + fmm - 2 * f0) / step**2 - h[i, i] - h[j, j]) / 2
    if not np.all(np.isfinite(h)):
        return np.eye(d) * 0.01
    vals, vecs = np.linalg.eigh(-h)
    var = np.clip(1.0 / np.maximum(vals, 1.0 / max_var), 1e-8, max_var)
    return (vecs * var) @ vecs.T


def fit(model, config: SamplerConfig, jobs: int = 1, x0=None,
        precondition: bool = True) -> PosteriorSamples:
    """Posterior sampling for a :class:`~epifuse.inference.model.FusionModel`.

    Chains start from a shared posterior mode with independent Gaussian
    jitter. With ``precondition`` the proposal shape starts from the Laplace
    covariance at the mode instead of a fixed isotropic scale.
    """
    mode = model.find_mode(x0)
    cov = laplace_covariance(model, mode) if precondition else None
    starts = []
    for c in range(config.n_chains):
        rng = spawn_rng(config.seed, STREAM_INIT, c)
        for _ in range(100):
            start = mode + config.init_jitter * rng.standard_normal(mode.size)
            if math.isfinite(model.log_density(start)):
                break
        else:
            start = mode
        starts.append(start)
    return sample(config, model, starts, model.param_names, jobs=jobs, proposal_cov=cov)
