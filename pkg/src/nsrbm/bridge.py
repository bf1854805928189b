"""Exact maximum and argmax of a drifted Brownian bridge.

``Z(t) = B(t) + int_0^t gamma`` is pinned at ``Z(r) = y``. The path is built
segment by segment between pinned points at most ``Delta`` apart; each pin is
an ordinary Gaussian bridge draw once the drift integral is removed. Within a
segment the proposal is a driftless Brownian bridge, stopped on leaving a
corridor of half-width ``a``, and it is accepted by the same thinning tests
as the unpinned sampler plus one extra Bernoulli with success probability
proportional to ``exp(psi)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np
from numba import njit

from . import _gamma as G
from . import distributions as D
from .distributions import ExitSample
from .model import NormalizedModel
from .tdbm import SegmentParams, _final_tests, _integral_test

_INV_SQRT_2PI_E = 1.0 / math.sqrt(2.0 * math.pi * math.e)


@njit(cache=True)
def _no_exit(rng, a, x, h, stats):
    # a bridge 0 -> x over h avoiding +-a is, rescaled, a bridge 1 -> 1 + x/a inside (0, 2)
    if abs(x) >= a:
        return False
    return D._bern_corridor(rng, 1.0, 1.0 - abs(x) / a, h / (a * a), stats)


@njit(cache=True)
def _kernel_sup(u, h):
    """sup over 0 < s <= h of the N(0, s) density at u."""
    if u * u <= h:
        if u == 0.0:
            return np.inf
        return _INV_SQRT_2PI_E / abs(u)
    return math.exp(-u * u / (2.0 * h)) / math.sqrt(2.0 * math.pi * h)


@njit(cache=True)
def _exit_given_endpoint(rng, a, x, h, stats):
    """(tau, side) of the first exit from (-a, a) of a bridge 0 -> x over h, given tau < h."""
    env = max(_kernel_sup(x - a, h), _kernel_sup(x + a, h))
    while True:
        tau, side = D._exit(rng, a)
        if tau < h:
            u = x - side * a
            dt = h - tau
            w = math.exp(-u * u / (2.0 * dt)) / math.sqrt(2.0 * math.pi * dt)
            if rng.random() * env < w:
                return tau, side
        stats[D.ST_EXIT_REJECTS] += 1


@njit(cache=True)
def _bridge_segment(tb, rng, s, z, h, x, a, rec, piece, stats):
    """Accept the path on ``[s, s + tau ^ h]`` given ``Z(s + h) = z + x``."""
    m, mt = G.bounds(tb, s, s + h)
    psi_max = mt * (abs(x) + a)
    stats[D.ST_SEGMENTS] += 1
    kap = np.empty(16)
    while True:
        stats[D.ST_PROPOSALS] += 1
        if _no_exit(rng, a, x, h, stats):
            exited = False
            tau = h
            side = 0.0
        else:
            exited = True
            tau, side = _exit_given_endpoint(rng, a, x, h, stats)
        if not _integral_test(tb, rng, s, tau, h, a, m):
            stats[D.ST_REJECTIONS] += 1
            continue
        kap, nk = D._poisson_times(rng, 2.0 * m * a, tau, kap)
        if exited:
            vals = D._skeleton_given_exit(rng, tau, kap, nk, a, side, stats)
            wend = side * a
        else:
            vals = D._skeleton_no_exit(rng, kap, nk, x, h, a, stats)
            wend = x
        if not _final_tests(tb, rng, s, tau, a, m, mt, kap, vals, nk, wend):
            stats[D.ST_REJECTIONS] += 1
            continue
        # the pinned-end weight exp(psi) is one on the no-exit branch, but both
        # branches share the normalizing bound
        psi = 0.0
        if exited:
            rest = G.igamma(tb, s + tau, s + h)
            u = x - wend
            psi = (u * u - (u - rest) ** 2) / (2.0 * (h - tau))
            if psi > psi_max * (1.0 + 1e-9) + 1e-12:
                raise ValueError("bridge weight exceeds its bound")
        if psi_max > 0.0 and rng.random() >= math.exp(min(psi - psi_max, 0.0)):
            stats[D.ST_REJECTIONS] += 1
            continue
        break
    ts = np.empty(nk + 2)
    ws = np.empty(nk + 2)
    ts[0] = 0.0
    ws[0] = 0.0
    ts[1:nk + 1] = kap[:nk]
    ws[1:nk + 1] = vals
    ts[nk + 1] = tau
    ws[nk + 1] = wend
    rec = D._scan_pieces(rng, s, z, a, ts, ws, nk + 1, side, rec, piece)
    stats[D.ST_SKELETON] += nk + 1
    return tau, side, wend, rec


@njit(cache=True)
def _radius(theta, x):
    # keep the pinned end at least a quarter-radius away from both corridor walls
    ax = abs(x)
    if 0.5 * theta < ax < 1.5 * theta:
        return 0.5 * ax
    return theta


@njit(cache=True)
def _bridge_run(tb, rng, s0, z0, r, y, theta, delta, rec, piece, stats):
    """Record of ``Z`` on ``[s0, r]`` from ``Z(s0) = z0`` pinned at ``Z(r) = y``."""
    s = s0
    z = z0
    pin_t = r
    pin_z = y
    pinned = False
    while s < r:
        if not pinned:
            if r - s <= delta:
                pin_t = r
                pin_z = y
            else:
                pin_t = s + delta
                frac = delta / (r - s)
                mean = G.igamma(tb, s, pin_t) + frac * (y - z - G.igamma(tb, s, r))
                sd = math.sqrt(delta * (r - pin_t) / (r - s))
                pin_z = z + mean + sd * rng.standard_normal()
            pinned = True
        h = pin_t - s
        x = pin_z - z
        a = _radius(theta, x)
        end, side, wend, rec = _bridge_segment(tb, rng, s, z, h, x, a, rec, piece, stats)
        if side == 0.0:
            s = pin_t
            z = pin_z
            pinned = False
        else:
            s = s + end
            z = z + wend
    return rec


@dataclass(frozen=True)
class BridgeMaxSample:
    eta: float
    max: float
    end_value: float


def _check_corridor(a: float, delta: float):
    if not (a > 0 and delta > 0):
        raise ValueError("radius and duration must be positive")


def bridge_no_exit_probability(a: float, x: float, delta: float) -> float:
    """Probability that a Brownian bridge 0 -> x over ``delta`` stays inside (-a, a)."""
    _check_corridor(a, delta)
    if abs(x) >= a:
        return 0.0
    T = delta / a**2
    y = 1.0 - abs(x) / a
    return float(-math.expm1(-2.0 * y / T) * D._p_value(1.0, y, T))


def bridge_no_exit(a: float, x: float, delta: float, rng) -> bool:
    """Exact Bernoulli draw of the event in :func:`bridge_no_exit_probability`."""
    _check_corridor(a, delta)
    return bool(_no_exit(D.as_generator(rng), a, x, delta, D._new_stats()))


def sample_exit_given_endpoint(a: float, x: float, delta: float, rng) -> ExitSample:
    """First exit from (-a, a) of a bridge 0 -> x over ``delta``, given that it exits."""
    _check_corridor(a, delta)
    if x in (a, -a):
        raise ValueError("endpoint on the corridor wall")
    tau, side = _exit_given_endpoint(D.as_generator(rng), a, x, delta, D._new_stats())
    return ExitSample(float(tau), int(side))


def sample_skeleton_given_endpoint_no_exit(kappas, a: float, x: float, delta: float, rng) -> np.ndarray:
    """Bridge 0 -> x over ``delta`` at ``kappas``, conditioned to stay inside (-a, a)."""
    _check_corridor(a, delta)
    k = np.ascontiguousarray(kappas, dtype=np.float64)
    if k.size and (np.any(np.diff(k) <= 0) or k[0] <= 0 or k[-1] >= delta):
        raise ValueError("times must be strictly ascending inside (0, delta)")
    if abs(x) >= a:
        raise ValueError("endpoint must lie inside the corridor")
    return D._skeleton_no_exit(D.as_generator(rng), k, k.size, x, delta, a, D._new_stats())


def sample_bridge_max(model: NormalizedModel, r: float, y: float, rng,
                      params: Optional[SegmentParams] = None) -> BridgeMaxSample:
    """Exact (argmax, max) of ``Z`` on ``[0, r]`` given ``Z(0) = 0`` and ``Z(r) = y``."""
    if not r > 0:
        raise ValueError("bridge length must be positive")
    params = params or SegmentParams.for_model(model)
    g = D.as_generator(rng)
    piece = np.zeros(8)
    D._set_point(piece, 0.0, 0.0)
    rec = _bridge_run(model.table, g, 0.0, 0.0, float(r), float(y), params.theta, params.delta,
                      0.0, piece, D._new_stats())
    return BridgeMaxSample(float(D._resolve_argmax(g, piece)), float(rec), float(y))


@njit(cache=True)
def _bridge_many(tb, rng, r, y, theta, delta, n):
    out = np.empty((n, 2))
    stats = np.zeros(D.N_STATS, dtype=np.int64)
    piece = np.zeros(8)
    for i in range(n):
        D._set_point(piece, 0.0, 0.0)
        out[i, 0] = _bridge_run(tb, rng, 0.0, 0.0, r, y, theta, delta, 0.0, piece, stats)
        out[i, 1] = D._resolve_argmax(rng, piece)
    return out, stats


def sample_bridge_max_batch(model: NormalizedModel, r: float, y: float, n: int, rng,
                            params: Optional[SegmentParams] = None) -> np.ndarray:
    """Columns (max, argmax) for ``n`` independent pinned runs."""
    params = params or SegmentParams.for_model(model)
    out, _ = _bridge_many(model.table, D.as_generator(rng), float(r), float(y),
                          params.theta, params.delta, int(n))
    return out
