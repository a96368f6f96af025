"""Convergence diagnostics: split-R-hat and multi-chain effective sample size."""
from __future__ import annotations

import numpy as np


def _as_3d(chains) -> np.ndarray:
    x = np.asarray(chains, dtype=float)
    if x.ndim == 2:
        x = x[:, :, None]
    if x.ndim != 3:
        raise ValueError("chains must have shape (n_chains, n_draws[, n_params])")
    return x


def _split(x: np.ndarray) -> np.ndarray:
    half = x.shape[1] // 2
    return np.concatenate([x[:, :half], x[:, x.shape[1] - half:]], axis=0)


def rhat(chains) -> np.ndarray | float:
    """Split-R-hat per parameter.

    Input is ``(n_chains, n_draws)`` or ``(n_chains, n_draws, n_params)``.
    Zero within- and between-chain variance yields 1.0 by convention.
    """
    x = _as_3d(chains)
    squeeze = np.ndim(chains) == 2
    if x.shape[0] < 2:
        raise ValueError("split-R-hat needs at least two chains")
    if x.shape[1] < 4:
        raise ValueError("split-R-hat needs at least four draws per chain")
    s = _split(x)
    n = s.shape[1]
    means = s.mean(axis=1)
    between = n * means.var(axis=0, ddof=1)
    within = s.var(axis=1, ddof=1).mean(axis=0)
    var_plus = (n - 1) / n * within + between / n
    with np.errstate(divide="ignore", invalid="ignore"):
        r = np.sqrt(var_plus / within)
    r = np.where(within > 0, r, np.where(between > 0, np.inf, 1.0))
    return float(r[0]) if squeeze else r


def _autocovariance(x: np.ndarray) -> np.ndarray:
    n = x.shape[-1]
    size = 2 ** int(np.ceil(np.log2(2 * n)))
    centred = x - x.mean(axis=-1, keepdims=True)
    f = np.fft.rfft(centred, n=size)
    acov = np.fft.irfft(f * np.conjugate(f), n=size)[..., :n]
    return acov / n


def ess(chains) -> np.ndarray | float:
    """Multi-chain ESS with Geyer's initial monotone sequence truncation."""
    x = _as_3d(chains)
    squeeze = np.ndim(chains) == 2
    m, n, d = x.shape
    out = np.empty(d)
    for j in range(d):
        xj = x[:, :, j]
        acov = _autocovariance(xj)
        chain_var = acov[:, 0] * n / (n - 1) if n > 1 else acov[:, 0]
        within = chain_var.mean()
        var_plus = within * (n - 1) / n
        if m > 1:
            var_plus += xj.mean(axis=1).var(ddof=1)
        if var_plus <= 0:
            out[j] = float(m * n)
            continue
        rho = 1.0 - (within - acov.mean(axis=0)) / var_plus
        rho[0] = 1.0
        # sum of adjacent pairs, truncated at the first negative pair, made monotone
        pairs = []
        t = 0
        while t + 1 < n:
            p = rho[t] + rho[t + 1]
            if p < 0:
                break
            if pairs and p > pairs[-1]:
                p = pairs[-1]
            pairs.append(p)
            t += 2
        tau = -1.0 + 2.0 * sum(pairs) if pairs else 1.0
        tau = max(tau, 1.0 / np.log10(m * n + 1))
        out[j] = m * n / tau
    return float(out[0]) if squeeze else out
