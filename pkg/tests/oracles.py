"""Reference laws used by the tests, written independently of the package code."""

import math

import numpy as np
from scipy import stats


def drifted_max_cdf(m, mu, t):
    """P(sup_{s<=t} (mu s + B_s) <= m), m >= 0."""
    m = np.asarray(m, dtype=float)
    s = math.sqrt(t)
    return stats.norm.cdf((m - mu * t) / s) - np.exp(2 * mu * m) * stats.norm.cdf((-m - mu * t) / s)


def rbm_transient_cdf(y, x0, mu, t):
    """P(X(t) <= y) for RBM with drift mu, unit variance, started at x0."""
    y = np.asarray(y, dtype=float)
    s = math.sqrt(t)
    return stats.norm.cdf((y - x0 - mu * t) / s) - np.exp(2 * mu * y) * stats.norm.cdf((-y - x0 - mu * t) / s)


def bridge_max_sf(m, x, h):
    """P(max > m) for a Brownian bridge 0 -> x over time h, m >= max(0, x)."""
    return np.exp(-2.0 * m * (m - x) / h)


def corridor_ratio_grid(x, y, T, n_paths, n_steps, rng):
    """Grid estimate of P(bridge x -> y over T stays in (0, 2) | it stays above 0).

    Bridges are simulated on a grid and each step is weighted by the exact
    probability that the connecting bridge crosses neither wall, so only
    double crossings within one step are missed. Returns (estimate, se).
    """
    dt = T / n_steps
    t = np.linspace(0.0, T, n_steps + 1)
    num = np.empty(n_paths)
    den = np.empty(n_paths)
    chunk = 20_000
    for lo in range(0, n_paths, chunk):
        k = min(chunk, n_paths - lo)
        w = np.cumsum(rng.standard_normal((k, n_steps)) * math.sqrt(dt), axis=1)
        w = np.concatenate([np.zeros((k, 1)), w], axis=1)
        path = x + w - (t / T) * (w[:, -1:] - (y - x))
        a, b = path[:, :-1], path[:, 1:]
        inside0 = (a > 0) & (b > 0)
        inside2 = (a < 2) & (b < 2)
        p0 = np.where(inside0, -np.expm1(-2.0 * np.clip(a, 0, None) * np.clip(b, 0, None) / dt), 0.0)
        p2 = np.where(inside2, -np.expm1(-2.0 * np.clip(2 - a, 0, None) * np.clip(2 - b, 0, None) / dt), 0.0)
        den[lo:lo + k] = np.prod(p0, axis=1)
        num[lo:lo + k] = np.prod(p0 * p2, axis=1)
    r = num.mean() / den.mean()
    # delta-method standard error of a ratio of means
    resid = num - r * den
    se = resid.std(ddof=1) / math.sqrt(n_paths) / den.mean()
    return float(r), float(se)


def ig_moments(mean, shape):
    return mean, mean**3 / shape


def ig_cdf(x, mean, shape):
    return stats.invgauss.cdf(x, mean / shape, scale=shape)


def exp_cdf(rate):
    return lambda x: stats.expon.cdf(x, scale=1.0 / rate)


def first_passage_grid(x, gamma_bar, n, horizon, dt, rng):
    """Grid first-passage times of ``-gamma_bar t + B_t`` to level ``x``, with bridge crossing correction.

    Paths not crossing by ``horizon`` are dropped; returns the crossing times.
    """
    out = []
    sd = math.sqrt(dt)
    chunk = 5000
    steps = int(round(horizon / dt))
    done = 0
    while done < n:
        k = min(chunk, n - done)
        z = np.zeros(k)
        tcross = np.full(k, np.inf)
        alive = np.ones(k, dtype=bool)
        for i in range(steps):
            nz = z - gamma_bar * dt + sd * rng.standard_normal(k)
            pc = np.where(nz >= x, 1.0, np.exp(-2.0 * np.clip(x - z, 0, None) * np.clip(x - nz, 0, None) / dt))
            hit = alive & (rng.random(k) < pc)
            tcross[hit] = (i + rng.random(hit.sum())) * dt
            alive &= ~hit
            z = nz
            if not alive.any():
                break
        out.append(tcross[np.isfinite(tcross)])
        done += k
    return np.concatenate(out)
