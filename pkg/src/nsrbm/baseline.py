"""Discretization baseline for the running maximum.

The drift is replaced by its cell average on a grid of width ``delta``; within
a cell the process is then a constant-drift Brownian motion whose endpoint and
maximum can be drawn jointly and exactly. The only error is the drift
averaging, which is of order ``delta^2`` per path.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
from numba import njit
from scipy import optimize

from . import _gamma as G
from . import distributions as D
from .model import NormalizedModel

DEFAULT_HORIZON = 35.0


@njit(cache=True)
def _cell_drifts(tb, T, delta):
    n = int(math.ceil(T / delta - 1e-9))
    out = np.empty(n)
    widths = np.empty(n)
    for i in range(n):
        t0 = i * delta
        t1 = min(T, t0 + delta)
        widths[i] = t1 - t0
        out[i] = G.igamma(tb, t0, t1) / widths[i]
    return out, widths


@njit(cache=True, nogil=True)
def _discretize_many(rng, drifts, widths, n, naive):
    out = np.empty((n, 2))
    for k in range(n):
        z = 0.0
        top = 0.0
        for i in range(drifts.shape[0]):
            h = widths[i]
            nz = z + drifts[i] * h + math.sqrt(h) * rng.standard_normal()
            if naive:
                peak = nz
            else:
                # bridge maximum: the drift does not change the law given both ends
                e = -0.5 * h * math.log(rng.random())
                peak = 0.5 * (z + nz) + math.sqrt(0.25 * (nz - z) ** 2 + e)
            if peak > top:
                top = peak
            z = nz
        out[k, 0] = top
        out[k, 1] = z
    return out


def discretize_max(model: NormalizedModel, T: float = DEFAULT_HORIZON, delta: float = 2.0**-10,
                   rng=None, size: int = 1, naive: bool = False) -> np.ndarray:
    """Approximate (max, endpoint) of ``Z`` on ``[0, T]``; one row per replication.

    With ``naive=True`` the maximum is taken over grid points only, which
    biases it downward by order ``sqrt(delta)``.
    """
    if not (delta > 0 and T > 0):
        raise ValueError("delta and T must be positive")
    drifts, widths = _cell_drifts(model.table, float(T), float(delta))
    return _discretize_many(D.as_generator(rng), drifts, widths, int(size), bool(naive))


def discretize_batch(model: NormalizedModel, T: float, delta: float, n: int, seed: int, naive: bool = False,
                     workers: int = 1, block_size: int = 250) -> np.ndarray:
    """Blocked version of :func:`discretize_max`; block ``b`` uses substream ``(seed, b)``."""
    if not (delta > 0 and T > 0):
        raise ValueError("delta and T must be positive")
    if n < 1 or block_size < 1:
        raise ValueError("n and block_size must be positive")
    drifts, widths = _cell_drifts(model.table, float(T), float(delta))
    sizes = [min(block_size, n - b * block_size) for b in range(-(-n // block_size))]

    def run_block(b):
        return _discretize_many(D.RandomStream(seed, (b,)).generator, drifts, widths, sizes[b], bool(naive))

    if workers <= 1 or len(sizes) == 1:
        return np.vstack([run_block(b) for b in range(len(sizes))])
    with ThreadPoolExecutor(max_workers=min(workers, os.cpu_count() or 1, len(sizes))) as ex:
        return np.vstack(list(ex.map(run_block, range(len(sizes)))))


@dataclass(frozen=True)
class DiscretizationPlan:
    delta: float
    T: float
    N: int
    budget: float

    def __post_init__(self):
        if not (self.delta > 0 and self.N >= 1):
            raise ValueError("plan needs delta > 0 and N >= 1")


def experiment_delta(n: float) -> float:
    """Step size paired with ``n`` trials in the convergence experiment."""
    return 0.02 * n**-0.25


def allocate_budget(c: float, T: float = DEFAULT_HORIZON, cost_per_step: float = 1.0) -> DiscretizationPlan:
    """Trial count and step for budget ``c`` under the cost model ``k T (N + 1) / delta``.

    Pairing ``delta = N^(-1/4) / 50`` gives ``N`` of order ``c^(4/5)`` and
    ``delta`` of order ``c^(-1/5)``.
    """
    if not c > 0:
        raise ValueError("budget must be positive")

    def cost(n):
        return cost_per_step * T * (n + 1.0) / experiment_delta(n) - c

    if cost(1.0) >= 0:
        n = 1.0
    else:
        hi = 2.0
        while cost(hi) < 0:
            hi *= 2.0
        n = optimize.brentq(cost, 1.0, hi, xtol=1e-9, rtol=1e-14)
    N = max(1, int(round(n)))
    return DiscretizationPlan(experiment_delta(n), float(T), N, float(c))
