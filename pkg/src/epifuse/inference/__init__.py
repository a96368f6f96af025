"""Bayesian fusion of low-latency surveillance feeds with death counts."""
from .diagnostics import ess, rhat
from .forecast import ForecastResult, posterior_predictive
from .model import DEATHS, DataBundle, FusionModel, ModelParams, Priors, log_posterior
from .sampler import (
    ChainResult,
    PosteriorSamples,
    SamplerConfig,
    fit,
    laplace_covariance,
    run_chain,
    sample,
    spawn_rng,
)

__all__ = [
    "DEATHS",
    "ChainResult",
    "DataBundle",
    "ForecastResult",
    "FusionModel",
    "ModelParams",
    "PosteriorSamples",
    "Priors",
    "SamplerConfig",
    "ess",
    "fit",
    "laplace_covariance",
    "log_posterior",
    "posterior_predictive",
    "rhat",
    "run_chain",
    "sample",
    "spawn_rng",
]
