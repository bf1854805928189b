"""Exact simulation of Brownian motion with time-dependent drift.

The path ``Z(s) = Z(s0) + int gamma + W`` is built in segments. Each segment
proposes driftless Brownian motion until it leaves a corridor of half-width
``a`` around its start or a time ``Delta`` elapses, and accepts the proposal
with probability proportional to the Girsanov weight, realized by Poisson
thinning and two uniform tests. The running maximum is tracked exactly; its
location is resolved lazily once the record is final.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from numba import njit
from scipy import optimize

from . import _gamma as G
from . import distributions as D
from .model import LocalBounds, NormalizedModel, local_bounds

HORIZON = 0
HIT_UPPER = 1
HIT_LOWER = 2
STOP_NAMES = {HORIZON: "horizon", HIT_UPPER: "upper", HIT_LOWER: "lower"}

_TOL = 1e-9  # slack for the bound-consistency checks


@njit(cache=True)
def _push(buf_t, buf_z, n, t, z):
    if n == buf_t.shape[0]:
        nt = np.empty(2 * n)
        nz = np.empty(2 * n)
        nt[:n] = buf_t
        nz[:n] = buf_z
        buf_t = nt
        buf_z = nz
    buf_t[n] = t
    buf_z[n] = z
    return buf_t, buf_z, n + 1


@njit(cache=True)
def _final_tests(tb, rng, s, end, a, m, mt, kap, vals, nk, wend):
    """Endpoint test and Poisson thinning for a proposal on [s, s + end]."""
    e2 = G.gamma(tb, s + end) * wend - mt * a
    if e2 > _TOL * (1.0 + mt * a):
        raise ValueError("drift bound violated at segment end")
    if rng.random() >= math.exp(min(e2, 0.0)):
        return False
    if m > 0.0:
        rate = 2.0 * m * a
        for i in range(nk):
            phi = G.dgamma(tb, s + kap[i]) * vals[i] + m * a
            if phi > rate * (1.0 + _TOL) or phi < -_TOL * rate:
                raise ValueError("derivative bound violated inside segment")
            if rate * rng.random() <= phi:
                return False
    return True


@njit(cache=True)
def _integral_test(tb, rng, s, end, dprime, a, m):
    e3 = -0.5 * G.igamma2(tb, s, s + end) + m * a * (end - dprime)
    if e3 > _TOL:
        raise ValueError("integral test exponent positive")
    return rng.random() < math.exp(min(e3, 0.0))


@njit(cache=True)
def _segment(tb, rng, s, z, a, dprime, rec, piece, stats):
    """Accept one localized segment from ``(s, z)`` and fold its maxima into the record.

    Returns ``(end, side, w_end, rec, kap, vals, nk)`` where ``side`` is +1/-1 for
    an exit through the top/bottom of the corridor and 0 when ``dprime`` elapsed.
    """
    m, mt = G.bounds(tb, s, s + dprime)
    stats[D.ST_SEGMENTS] += 1
    kap = np.empty(16)
    while True:
        stats[D.ST_PROPOSALS] += 1
        tau, side = D._exit(rng, a)
        exited = tau <= dprime
        end = tau if exited else dprime
        if not _integral_test(tb, rng, s, end, dprime, a, m):
            stats[D.ST_REJECTIONS] += 1
            continue
        kap, nk = D._poisson_times(rng, 2.0 * m * a, end, kap)
        if exited:
            vals = D._skeleton_given_exit(rng, tau, kap, nk, a, side, stats)
            wend = side * a
        else:
            if kap.shape[0] == nk:
                nb = np.empty(2 * nk + 1)
                nb[:nk] = kap[:nk]
                kap = nb
            kap[nk] = dprime
            allv = D._skeleton_given_exit(rng, tau, kap, nk + 1, a, side, stats)
            vals = allv[:nk]
            wend = allv[nk]
        if _final_tests(tb, rng, s, end, a, m, mt, kap, vals, nk, wend):
            break
        stats[D.ST_REJECTIONS] += 1
    ts = np.empty(nk + 2)
    ws = np.empty(nk + 2)
    ts[0] = 0.0
    ws[0] = 0.0
    ts[1:nk + 1] = kap[:nk]
    ws[1:nk + 1] = vals
    ts[nk + 1] = end
    ws[nk + 1] = wend
    side_exit = side if exited else 0.0
    rec = D._scan_pieces(rng, s, z, a, ts, ws, nk + 1, side_exit, rec, piece)
    stats[D.ST_SKELETON] += nk + 1
    return end, side_exit, wend, rec, kap, vals, nk


@njit(cache=True)
def _tdbm_run(tb, rng, s0, z0, t_end, lo_bar, hi_bar, theta, delta, rec, piece, stats,
              skel_t, skel_z, nskel, record):
    """Simulate from (s0, z0) until ``t_end`` or a barrier; returns the stopping state."""
    s = s0
    z = z0
    reason = HORIZON
    while s < t_end:
        a = min(theta, z - lo_bar, hi_bar - z)
        dprime = min(delta, t_end - s)
        end, side, wend, rec, kap, vals, nk = _segment(tb, rng, s, z, a, dprime, rec, piece, stats)
        if record:
            for i in range(nk):
                skel_t, skel_z, nskel = _push(skel_t, skel_z, nskel, s + kap[i], z + vals[i])
        s = t_end if (side == 0.0 and dprime == t_end - s) else s + end
        if side < 0.0 and z - lo_bar == a:
            z = lo_bar
            reason = HIT_LOWER
        elif side > 0.0 and hi_bar - z == a:
            z = hi_bar
            reason = HIT_UPPER
        else:
            z = z + wend
        if record:
            skel_t, skel_z, nskel = _push(skel_t, skel_z, nskel, s, z)
        if reason != HORIZON:
            break
    return s, z, reason, rec, skel_t, skel_z, nskel


# ---------------------------------------------------------------------------
# parameter policy

_LOG4 = 2.0 * math.log(2.0)


def choose_delta(theta: float, bounds: LocalBounds) -> float:
    """Largest ``Delta <= 1/(m theta)`` with ``theta^2/Delta - theta (m~ + Delta m / 2) >= 2 log 2``."""
    if not theta > 0:
        raise ValueError("theta must be positive")
    m, mt = bounds.m, bounds.m_tilde
    b = theta * mt + _LOG4
    if m > 0:
        root = (-b + math.sqrt(b * b + 2.0 * theta**3 * m)) / (theta * m)
        delta = min(1.0 / (m * theta), root)
    else:
        delta = theta * theta / b
    if not (delta > 0 and math.isfinite(delta)):
        raise ValueError(f"no feasible segment horizon for theta={theta}; use a smaller theta")
    return delta


def runtime_surrogate(theta: float, bounds: LocalBounds) -> float:
    """Expected proposal work per unit time, up to constants."""
    delta = choose_delta(theta, bounds)
    m, mt = bounds.m, bounds.m_tilde
    return (1.0 + m * theta * (1.0 + delta)) * math.exp(m * theta * delta + mt * theta) / delta


def choose_theta(bounds: LocalBounds, lo: float = 0.02, hi: float = 5.0) -> float:
    """Localization radius minimizing :func:`runtime_surrogate`."""
    res = optimize.minimize_scalar(lambda lt: math.log(runtime_surrogate(math.exp(lt), bounds)),
                                   bounds=(math.log(lo), math.log(hi)), method="bounded",
                                   options={"xatol": 1e-6})
    return float(math.exp(res.x))


@dataclass(frozen=True)
class SegmentParams:
    """Localization radius ``theta`` and segment horizon ``delta``."""

    theta: float
    delta: float

    @classmethod
    def for_model(cls, model: NormalizedModel, theta: Optional[float] = None,
                  delta: Optional[float] = None) -> "SegmentParams":
        b = model.global_bounds
        th = choose_theta(b) if theta is None else float(theta)
        dl = choose_delta(th, b) if delta is None else float(delta)
        return cls(th, dl)


# ---------------------------------------------------------------------------
# Python-facing API


@dataclass
class SegmentProposal:
    """One localized proposal: exit/horizon time, Poisson times and path values."""

    tau: float
    kappas: np.ndarray
    w_values: np.ndarray  # at kappas
    w_end: float
    a: float
    bounds: LocalBounds
    delta: float

    @property
    def exited(self) -> bool:
        return self.tau < self.delta


@dataclass
class TdbmSample:
    t_max: float
    max: float
    end_time: float
    end_value: float
    stop_reason: str
    skeleton_t: np.ndarray = field(repr=False)
    skeleton_z: np.ndarray = field(repr=False)
    stats: np.ndarray = field(repr=False)


def likelihood_exponent(segment: SegmentProposal, model: NormalizedModel, s: float) -> float:
    """Girsanov exponent ``gamma(s+tau) W_tau - 1/2 int gamma^2 - int gamma' W``.

    The path integral uses the trapezoid rule on the proposal's points, so it
    is only meaningful for densely sampled validation paths.
    """
    tb = model.table
    t = np.concatenate([[0.0], segment.kappas, [segment.tau]])
    w = np.concatenate([[0.0], segment.w_values, [segment.w_end]])
    f = model.gamma_prime(s + t) * w
    path = float(np.sum(0.5 * (f[1:] + f[:-1]) * np.diff(t)))
    return float(G.gamma(tb, s + segment.tau) * segment.w_end - 0.5 * G.igamma2(tb, s, s + segment.tau) - path)


def propose_segment(model: NormalizedModel, s: float, a: float, delta: float, rng) -> SegmentProposal:
    """Draw one unconditioned proposal on ``[s, s + delta]``."""
    g = D.as_generator(rng)
    b = local_bounds(model, s, delta)
    tau, side = D._exit(g, a)
    end = min(tau, delta)
    kap, nk = D._poisson_times(g, 2.0 * b.m * a, end, np.empty(16))
    pts = kap[:nk] if tau <= delta else np.append(kap[:nk], delta)
    vals = D._skeleton_given_exit(g, tau, pts, pts.size, a, side, D._new_stats())
    if tau <= delta:
        return SegmentProposal(tau, kap[:nk].copy(), vals, side * a, a, b, delta)
    return SegmentProposal(delta, kap[:nk].copy(), vals[:nk], float(vals[nk]), a, b, delta)


def accept_segment(segment: SegmentProposal, model: NormalizedModel, s: float, rng) -> bool:
    """Three-part uniform test accepting with probability ``P(I = 1 | proposal)``."""
    g = D.as_generator(rng)
    tb = model.table
    b = segment.bounds
    if not _integral_test(tb, g, s, segment.tau, segment.delta, segment.a, b.m):
        return False
    return bool(_final_tests(tb, g, s, segment.tau, segment.a, b.m, b.m_tilde, segment.kappas,
                             segment.w_values, segment.kappas.size, segment.w_end))


def sample_tdbm(model: NormalizedModel, start=(0.0, 0.0), horizon: float = 1.0,
                barriers=(-math.inf, math.inf), params: Optional[SegmentParams] = None,
                rng=None, record_skeleton: bool = True) -> TdbmSample:
    """Exact (argmax, max, end) of ``Z`` from ``start`` until ``horizon`` or a barrier."""
    s0, z0 = (float(x) for x in start)
    v, u = (float(x) for x in barriers)
    if not v < z0 < u:
        raise ValueError("start value must lie strictly between the barriers")
    # a drift with negative mean may never reach an upper barrier
    if math.isinf(horizon) and math.isinf(v) and (math.isinf(u) or model.envelope is not None):
        raise ValueError("this run would not terminate: give a finite horizon or a lower barrier")
    params = params or SegmentParams.for_model(model)
    g = D.as_generator(rng)
    piece = np.zeros(8)
    D._set_point(piece, s0, z0)
    stats = D._new_stats()
    bt = np.empty(64)
    bz = np.empty(64)
    bt[0], bz[0] = s0, z0
    s, z, reason, rec, bt, bz, n = _tdbm_run(model.table, g, s0, z0, float(s0 + horizon), v, u,
                                            params.theta, params.delta, z0, piece, stats,
                                            bt, bz, 1, record_skeleton)
    t_max = D._resolve_argmax(g, piece)
    return TdbmSample(float(t_max), float(rec), float(s), float(z), STOP_NAMES[reason],
                      bt[:n].copy(), bz[:n].copy(), stats)


@njit(cache=True)
def _sup_many(tb, rng, horizon, theta, delta, n):
    """Maxima, argmaxima and endpoints of ``n`` independent runs from (0, 0)."""
    out = np.empty((n, 3))
    stats = np.zeros(D.N_STATS, dtype=np.int64)
    piece = np.zeros(8)
    bt = np.empty(1)
    bz = np.empty(1)
    for i in range(n):
        D._set_point(piece, 0.0, 0.0)
        s, z, reason, rec, bt, bz, k = _tdbm_run(tb, rng, 0.0, 0.0, horizon, -np.inf, np.inf,
                                                theta, delta, 0.0, piece, stats, bt, bz, 0, False)
        out[i, 0] = rec
        out[i, 1] = D._resolve_argmax(rng, piece)
        out[i, 2] = z
    return out, stats


def sample_tdbm_batch(model: NormalizedModel, horizon: float, n: int, rng,
                      params: Optional[SegmentParams] = None) -> np.ndarray:
    """Columns (max, argmax, end value) for ``n`` runs on ``[0, horizon]``."""
    params = params or SegmentParams.for_model(model)
    out, _ = _sup_many(model.table, D.as_generator(rng), float(horizon), params.theta, params.delta, int(n))
    return out
