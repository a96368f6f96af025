"""Bayesian fusion of low-latency surveillance feeds with death counts."""
