"""Bijections between constrained parameters and unconstrained reals."""
from __future__ import annotations

import numpy as np
from scipy.special import expit, logit


def log_transform(y):
    """``x = exp(y)`` with ``log|dx/dy| = y``."""
    y = np.asarray(y, dtype=float)
    return np.exp(y), float(np.sum(y))


def logit_transform(y: float):
    x = float(expit(y))
    return x, float(np.log(x) + np.log1p(-x)) if 0 < x < 1 else -np.inf


def inverse_logit(x: float) -> float:
    return float(logit(x))


def stick_breaking(y):
    """Map ``K`` reals to a ``K+1`` simplex; returns ``(x, log|det J|)``.

    The offsets ``log(K - k)`` make ``y = 0`` map to the uniform simplex.
    """
    y = np.asarray(y, dtype=float)
    k = y.size
    x = np.empty(k + 1)
    remaining = 1.0
    log_jac = 0.0
    for i in range(k):
        z = expit(y[i] - np.log(k - i))
        x[i] = remaining * z
        log_jac += np.log(z) + np.log1p(-z) + np.log(remaining)
        remaining -= x[i]
    x[k] = remaining
    return x, float(log_jac)


def inverse_stick_breaking(x) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    k = x.size - 1
    y = np.empty(k)
    remaining = 1.0
    for i in range(k):
        z = x[i] / remaining
        y[i] = logit(z) + np.log(k - i)
        remaining -= x[i]
    return y
