"""Posterior summaries and chain diagnostics."""
from __future__ import annotations

import math

import numpy as np


def mpm(draws) -> float:
    """Marginal posterior mean."""
    return float(np.mean(np.asarray(draws, dtype=float)))


def hpd_interval(draws, level: float = 0.95) -> tuple[float, float]:
    """Shortest interval containing ``level`` of the sorted draws."""
    x = np.sort(np.asarray(draws, dtype=float))
    n = x.shape[0]
    if n == 0:
        raise ValueError("no draws")
    if not 0 < level <= 1:
        raise ValueError("level must lie in (0, 1]")
    k = max(int(math.ceil(level * n)), 1)
    if k >= n:
        return float(x[0]), float(x[-1])
    widths = x[k - 1:] - x[: n - k + 1]
    i = int(np.argmin(widths))
    return float(x[i]), float(x[i + k - 1])


def _autocov(x: np.ndarray, maxlag: int) -> np.ndarray:
    n = x.shape[0]
    xc = x - x.mean()
    m = 1 << (2 * n - 1).bit_length()
    f = np.fft.rfft(xc, m)
    acov = np.fft.irfft(f * np.conj(f), m)[: maxlag + 1] / n
    return acov


def parzen_weights(bandwidth: float, maxlag: int) -> np.ndarray:
    z = np.arange(maxlag + 1) / bandwidth
    w = np.where(z <= 0.5, 1 - 6 * z ** 2 + 6 * z ** 3, 2 * (1 - z) ** 3)
    return np.where(z <= 1.0, w, 0.0)


def inefficiency_factor(draws, bandwidth: float | None = None) -> float:
    """Variance of the sample mean relative to iid sampling.

    Parzen-window spectral estimate at frequency zero.  The default
    bandwidth is :func:`default_bandwidth`.  A constant series has
    inefficiency 0.
    """
    x = np.asarray(draws, dtype=float)
    n = x.shape[0]
    if n < 2:
        raise ValueError("need at least two draws")
    if np.all(x == x[0]):
        return 0.0
    if bandwidth is None:
        acov = _autocov(x, n - 1)
        B = default_bandwidth(n, acov / acov[0])
    else:
        B = float(bandwidth)
    maxlag = min(int(B), n - 1)
    acov = _autocov(x, maxlag)
    if acov[0] <= 0:
        return 0.0
    w = parzen_weights(B, maxlag)
    rho = acov / acov[0]
    return float(max(1.0 + 2.0 * np.sum(w[1:] * rho[1:]), 0.0))


def default_bandwidth(n: int, acf=None) -> float:
    """``4 (n/100)^{1/4}`` lags, widened for persistent chains.

    With an autocorrelation function the bandwidth is at least five times the
    first lag at which |acf| drops below 0.05, capped at n/4; the fixed rule
    alone truncates too early once autocorrelations decay slowly.
    """
    B = 4.0 * (n / 100.0) ** 0.25
    if acf is not None:
        small = np.flatnonzero(np.abs(acf[1:]) < 0.05)
        first = int(small[0]) + 1 if small.size else n
        B = max(B, min(5.0 * first, n / 4.0))
    return max(B, 2.0)


def cusum_path(draws) -> np.ndarray:
    """Standardised cumulative deviation of running means from the full mean."""
    x = np.asarray(draws, dtype=float)
    n = x.shape[0]
    if n == 0:
        return np.zeros(0)
    sd = x.std()
    if sd == 0:
        return np.zeros(n)
    return np.cumsum(x - x.mean()) / (n * sd)


def batch_means_se(values, n_batches: int = 20) -> float:
    """Monte Carlo standard error of a mean by non-overlapping batch means."""
    v = np.asarray(values, dtype=float)
    n = v.shape[0]
    nb = min(n_batches, n)
    if nb < 2:
        return float("nan")
    size = n // nb
    means = v[: nb * size].reshape(nb, size).mean(axis=1)
    return float(means.std(ddof=1) / math.sqrt(nb))
