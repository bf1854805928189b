"""Reflected Brownian motion through the maximum of a drifted Brownian motion.

For the time-reversed coefficients, ``X(t)`` started from ``x0`` equals
``max(M, x0 + Y)`` where ``(v, M, Y)`` is the (argmax, maximum, endpoint)
triplet of the free process on ``[0, t]``; the argmax is the time since the
queue was last empty. Two exact triplet samplers are provided:

* :func:`sample_triplet_alg2` alternates localized runs with a dominating
  constant-drift motion whose hitting test certifies the global maximum.
* :func:`sample_triplet_alg1` draws a random horizon beyond which the path
  stays below its start, then pins the path there and samples a bridge.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from numba import njit
from scipy import integrate, optimize, stats as sps

from . import _gamma as G
from . import distributions as D
from .bridge import _bridge_run
from .model import Constant, ModelError, NormalizedModel
from .tdbm import HORIZON, SegmentParams, _tdbm_run

ALG1 = 1
ALG2 = 2
BETA_RULES = ("standard", "improved")


@dataclass(frozen=True)
class Alg2Config:
    """Tuning of the dominating-process loop.

    ``c`` sets how far below the record a run must fall before the hitting
    test, in units of the envelope intercept; ``epsilon`` is the minimum run
    length. ``theta``/``delta`` override the localization policy.
    """

    c: float = 2.0
    epsilon: float = 0.1
    beta_rule: str = "standard"
    theta: Optional[float] = None
    delta: Optional[float] = None

    def __post_init__(self):
        if not self.c > 1:
            raise ValueError("c must exceed 1")
        if not self.epsilon > 0:
            raise ValueError("epsilon must be positive")
        if self.beta_rule not in BETA_RULES:
            raise ValueError(f"beta_rule must be one of {BETA_RULES}")


@dataclass
class TripletSample:
    v: float
    M: float
    Y_end: Optional[float]
    iterations: int
    skeleton_points: int
    rejections: int
    eta: float = field(default=math.nan, repr=False)  # argmax on the normalized clock
    synthetic_intercept: bool = False  # a zero envelope intercept was lifted for sampling


@dataclass(frozen=True)
class RbmState:
    age: float
    x_t: float


# ---------------------------------------------------------------------------
# kernels


@njit(cache=True)
def _alpha(rng, x, gb):
    """Waiting time until a drift ``-gb`` motion rises by ``x``; ``inf`` if never."""
    if rng.random() >= math.exp(-2.0 * gb * x):
        return np.inf
    return D._ig(rng, x / gb, x * x)


@njit(cache=True)
def _norm3(rng, m1, sd):
    a = m1 + sd * rng.standard_normal()
    b = sd * rng.standard_normal()
    c = sd * rng.standard_normal()
    return math.sqrt(a * a + b * b + c * c)


@njit(cache=True)
def _gap_never(rng, x, gb, h):
    """Gap below the level after ``h`` for a drift ``+gb`` motion from ``x`` that never reaches 0."""
    sd = math.sqrt(h)
    while True:
        y = x + gb * h + sd * rng.standard_normal()
        if y <= 0.0:
            continue
        w = -math.expm1(-2.0 * x * y / h) * -math.expm1(-2.0 * gb * y)
        if rng.random() < w:
            return y


@njit(cache=True)
def _gap_hit(rng, x, tau, h):
    """Same gap when the level is first reached at ``tau > h``: a reversed Bessel-3 bridge."""
    u = tau - h
    return _norm3(rng, x * u / tau, math.sqrt(u * (tau - u) / tau))


@njit(cache=True)
def _alg2(tb, rng, T, d, gb, c, eps, improved, theta, delta, piece, stats):
    """Returns (record, endpoint or nan, iterations)."""
    s = 0.0
    z = 0.0
    rec = 0.0
    D._set_point(piece, 0.0, 0.0)
    bt = np.empty(1)
    bz = np.empty(1)
    k = 0
    prev_eps = 0.0
    while True:
        k += 1
        start_rec = rec
        t1 = min(s + eps, T)
        s, z, reason, rec, bt, bz, _ = _tdbm_run(tb, rng, s, z, t1, -np.inf, np.inf, theta, delta,
                                                 rec, piece, stats, bt, bz, 0, False)
        if s >= T:
            return rec, z, k
        level = start_rec
        if improved:
            level = prev_eps if k > 1 else rec
            prev_eps = rec
        floor = level - c * d
        if z > floor:
            s, z, reason, rec, bt, bz, _ = _tdbm_run(tb, rng, s, z, T, floor, np.inf, theta, delta,
                                                     rec, piece, stats, bt, bz, 0, False)
            if reason == HORIZON:
                return rec, z, k
        beta = s
        gap = rec - (z + d)
        wait = _alpha(rng, gap, gb)
        alpha = beta + wait
        if alpha >= T:
            if math.isinf(T):
                return rec, np.nan, k
            h = T - beta
            if math.isinf(alpha):
                g = _gap_never(rng, gap, gb, h)
            else:
                g = _gap_hit(rng, gap, wait, h)
            return rec, rec - g - d + gb * h + G.igamma(tb, beta, T), k
        s = alpha
        z = rec - d + gb * wait + G.igamma(tb, beta, alpha)


@njit(cache=True)
def _alg1(tb, rng, T, d, gb, theta, delta, piece, stats):
    """Returns (record, endpoint or nan, L)."""
    L = 1.0 / D._ig(rng, gb / d, gb * gb)
    y_last = gb * L - d
    r = min(L, T)
    if r < L:
        b_r = y_last * r / L + math.sqrt(r * (L - r) / L) * rng.standard_normal()
    else:
        b_r = y_last
    D._set_point(piece, 0.0, 0.0)
    rec = _bridge_run(tb, rng, 0.0, 0.0, r, G.igamma(tb, 0.0, r) + b_r, theta, delta, 0.0, piece, stats)
    if math.isinf(T):
        return rec, np.nan, L
    if T <= L:
        return rec, G.igamma(tb, 0.0, T) + b_r, L
    # beyond L the gap below the line gb*s - d is a Bessel-3 process with drift gb
    h = T - L
    b_t = gb * T - d - _norm3(rng, gb * h, math.sqrt(h))
    return rec, G.igamma(tb, 0.0, T) + b_t, L


@njit(cache=True, nogil=True)
def _triplets(tb, rng, algorithm, T, d, gb, c, eps, improved, theta, delta, n):
    """Rows of (max, argmax, endpoint, iterations, skeleton points, rejections)."""
    out = np.empty((n, 6))
    piece = np.zeros(8)
    for i in range(n):
        stats = np.zeros(D.N_STATS, dtype=np.int64)
        if algorithm == ALG2:
            rec, yend, k = _alg2(tb, rng, T, d, gb, c, eps, improved, theta, delta, piece, stats)
        else:
            rec, yend, _ = _alg1(tb, rng, T, d, gb, theta, delta, piece, stats)
            k = 1
        out[i, 0] = rec
        out[i, 1] = D._resolve_argmax(rng, piece)
        out[i, 2] = yend
        out[i, 3] = k
        out[i, 4] = stats[D.ST_SKELETON]
        out[i, 5] = stats[D.ST_REJECTIONS]
    return out


# ---------------------------------------------------------------------------
# Python-facing API


def sample_alpha(x: float, gamma_bar: float, rng) -> float:
    """Time for a drift ``-gamma_bar`` Brownian motion to rise by ``x``; ``inf`` if it never does."""
    if not x > 0:
        raise ValueError("gap must be positive")
    if not gamma_bar > 0:
        raise ValueError("gamma_bar must be positive")
    return float(_alpha(D.as_generator(rng), float(x), float(gamma_bar)))


def _horizon(model: NormalizedModel, t: float) -> float:
    if not t > 0:
        raise ValueError("horizon must be positive")
    return model.lam(t)


def _params(model: NormalizedModel, config: Optional[Alg2Config]) -> SegmentParams:
    config = config or Alg2Config()
    return SegmentParams.for_model(model, config.theta, config.delta)


def to_original_clock(model: NormalizedModel, eta) -> np.ndarray:
    eta = np.asarray(eta, dtype=np.float64)
    s2 = model.spec.sigma2
    if isinstance(s2, Constant):
        return eta / s2.value
    return np.array([model.lam_inv(float(e)) for e in eta.ravel()]).reshape(eta.shape)


def _row_to_triplet(model: NormalizedModel, row, t: float) -> TripletSample:
    M, eta, yend, k, nsk, nrej = row
    return TripletSample(v=float(model.lam_inv(eta)), M=float(M),
                         Y_end=None if math.isinf(t) else float(yend),
                         iterations=int(k), skeleton_points=int(nsk), rejections=int(nrej), eta=float(eta),
                         synthetic_intercept=model.require_envelope().d <= 0)


def _run(model, t, n, rng, algorithm, config):
    env = model.require_envelope()
    config = config or Alg2Config()
    p = _params(model, config)
    T = _horizon(model, t)
    return _triplets(model.table, D.as_generator(rng), algorithm, float(T), env.working_d(),
                     env.gamma_bar, config.c, config.epsilon, config.beta_rule == "improved",
                     p.theta, p.delta, int(n))


def sample_triplet_alg2(model: NormalizedModel, t: float = math.inf, config: Optional[Alg2Config] = None,
                        rng=None) -> TripletSample:
    """Exact (argmax, max, endpoint) on ``[0, t]`` by the dominating-process loop."""
    return _row_to_triplet(model, _run(model, t, 1, rng, ALG2, config)[0], t)


def sample_triplet_alg1(model: NormalizedModel, t: float = math.inf, rng=None,
                        config: Optional[Alg2Config] = None) -> TripletSample:
    """Exact (argmax, max, endpoint) on ``[0, t]`` via the last-passage horizon and a pinned bridge.

    A zero envelope intercept has no proper horizon law; the sampler then uses
    the positive working intercept, which still satisfies the envelope.
    """
    return _row_to_triplet(model, _run(model, t, 1, rng, ALG1, config)[0], t)


@dataclass
class TripletBatch:
    """Columns of a batch of triplets, ordered by replication index."""

    v: np.ndarray
    M: np.ndarray
    Y_end: np.ndarray
    iterations: np.ndarray
    skeleton_points: np.ndarray
    rejections: np.ndarray
    block: np.ndarray

    def __len__(self):
        return self.M.size


DEFAULT_BLOCK = 250


def sample_triplets(model: NormalizedModel, t: float, n: int, seed: int, algorithm: str = "alg2",
                    config: Optional[Alg2Config] = None, workers: int = 1,
                    block_size: int = DEFAULT_BLOCK) -> TripletBatch:
    """``n`` independent triplets; block ``b`` always uses substream ``(seed, b)``.

    The draws depend only on ``(seed, block_size)``, never on ``workers``.
    """
    if algorithm not in ("alg1", "alg2"):
        raise ValueError("algorithm must be 'alg1' or 'alg2'")
    if n < 1 or block_size < 1:
        raise ValueError("n and block_size must be positive")
    alg = ALG1 if algorithm == "alg1" else ALG2
    env = model.require_envelope()
    config = config or Alg2Config()
    p = _params(model, config)
    T = float(_horizon(model, t))
    sizes = [min(block_size, n - b * block_size) for b in range(-(-n // block_size))]
    args = (alg, T, env.working_d(), env.gamma_bar, config.c, config.epsilon,
            config.beta_rule == "improved", p.theta, p.delta)

    def run_block(b):
        g = D.RandomStream(seed, (b,)).generator
        return _triplets(model.table, g, *args, sizes[b])

    if workers <= 1 or len(sizes) == 1:
        blocks = [run_block(b) for b in range(len(sizes))]
    else:
        with ThreadPoolExecutor(max_workers=min(workers, os.cpu_count() or 1, len(sizes))) as ex:
            blocks = list(ex.map(run_block, range(len(sizes))))
    rows = np.vstack(blocks)
    v = to_original_clock(model, rows[:, 1])
    yend = rows[:, 2] if math.isfinite(t) else np.full(n, np.nan)
    return TripletBatch(v=v, M=rows[:, 0].copy(), Y_end=yend.copy(), iterations=rows[:, 3].astype(np.int64),
                        skeleton_points=rows[:, 4].astype(np.int64), rejections=rows[:, 5].astype(np.int64),
                        block=np.repeat(np.arange(len(sizes)), sizes))


# ---------------------------------------------------------------------------
# reflection and warm-up planning


def rbm_state_from_triplet(x0: float, triplet: TripletSample, t: float) -> RbmState:
    """``X(t) = max(M, x0 + Y)``; the age is the argmax when the maximum wins, else infinite.

    The triplet must come from the time-reversed coefficients.
    """
    if x0 < 0:
        raise ValueError("initial level must be nonnegative")
    if math.isinf(t):
        return RbmState(triplet.v, triplet.M)
    if triplet.Y_end is None:
        raise ValueError("a finite horizon needs the endpoint of the triplet")
    free = x0 + triplet.Y_end
    if triplet.M >= free:
        return RbmState(triplet.v, triplet.M)
    return RbmState(math.inf, free)


def rbm_states(x0: float, batch: TripletBatch, t: float):
    """Vectorized :func:`rbm_state_from_triplet`; returns ``(age, x_t)`` arrays."""
    if math.isinf(t):
        return batch.v.copy(), batch.M.copy()
    free = x0 + batch.Y_end
    idle = batch.M >= free
    return np.where(idle, batch.v, np.inf), np.where(idle, batch.M, free)


def warmup_bound(u: float, envelope) -> float:
    """Upper bound on ``P(argmax >= u)`` on the normalized clock, from the horizon law."""
    if u <= 0:
        return 1.0
    if math.isinf(u):
        return 0.0
    d, gb = envelope.d, envelope.gamma_bar

    def dens(x):
        return math.sqrt(gb * gb / (2.0 * math.pi * x**3)) * math.exp(-((d * x - gb) ** 2) / (2.0 * x))

    hi = 1.0 / u
    # split at the mode so quad sees the peak
    mode = gb * gb / 3.0 if d == 0 else (gb / d) * (math.hypot(1.0, 1.5 / (d * gb)) - 1.5 / (d * gb))
    opts = dict(limit=200, epsabs=1e-14, epsrel=1e-12)
    if hi <= mode:
        val = integrate.quad(dens, 0.0, hi, **opts)[0]
    else:
        # the upper piece may span many decades: integrate it in log x
        upper = integrate.quad(lambda y: dens(math.exp(y)) * math.exp(y), math.log(mode), math.log(hi), **opts)[0]
        val = integrate.quad(dens, 0.0, mode, **opts)[0] + upper
    return float(min(max(val, 0.0), 1.0))


def invert_warmup_bound(epsilon: float, envelope) -> float:
    """Smallest ``u`` with :func:`warmup_bound` at most ``epsilon`` (normalized clock)."""
    if not 0 < epsilon < 1:
        raise ValueError("epsilon must lie in (0, 1)")
    f = lambda lu: warmup_bound(math.exp(lu), envelope) - epsilon
    lo, hi = -10.0, 0.0
    while f(hi) > 0:
        hi += 5.0
    while f(lo) < 0:
        lo -= 5.0
    return float(math.exp(optimize.brentq(f, lo, hi, xtol=1e-12)))


@dataclass
class WarmupPlan:
    recommended: Optional[float]
    quantile: Optional[float]
    se: float
    bound: float
    epsilon: float
    n_trials: int
    n_infinite: int
    tail_u: np.ndarray = field(repr=False)
    tail_empirical: np.ndarray = field(repr=False)
    tail_bound: np.ndarray = field(repr=False)
    note: str = ""


SAFETY_NOTE = ("The recommendation bounds the RBM age; for the queue it approximates, "
               "doubling it is a prudent safety factor.")


def plan_from_ages(ages: np.ndarray, epsilon: float, bound: float, confidence: float = 0.95) -> WarmupPlan:
    """Upper confidence bound for the ``1 - epsilon`` quantile of ``ages``."""
    ages = np.sort(np.asarray(ages, dtype=np.float64))
    n = ages.size
    n_inf = int(np.isinf(ages).sum())
    q_idx = min(n - 1, int(math.ceil((1 - epsilon) * n)) - 1)
    k = min(n - 1, int(sps.binom.ppf(confidence, n, 1 - epsilon)))
    # order statistics one binomial SD either side give the quantile's SE
    sd = math.sqrt(n * epsilon * (1 - epsilon))
    lo_i, hi_i = max(0, int(q_idx - sd)), min(n - 1, int(math.ceil(q_idx + sd)))
    quant = float(ages[q_idx])
    rec = float(ages[k])
    se = float((ages[hi_i] - ages[lo_i]) / 2.0) if np.isfinite(ages[hi_i]) else math.inf
    finite = ages[np.isfinite(ages)]
    grid = np.unique(np.quantile(finite, np.linspace(0, 1, 41))) if finite.size else np.array([])
    emp = np.array([(ages >= u).mean() for u in grid])
    note = SAFETY_NOTE
    if math.isinf(rec):
        note = "no finite recommendation at this horizon. " + SAFETY_NOTE
    return WarmupPlan(None if math.isinf(rec) else rec, None if math.isinf(quant) else quant, se, bound,
                      epsilon, n, n_inf, grid, emp, np.array([]), note)


def plan_warmup(model: NormalizedModel, epsilon_tv: float, t: float, x0: float, n_trials: int, seed: int,
                algorithm: str = "alg2", config: Optional[Alg2Config] = None, workers: int = 1) -> WarmupPlan:
    """Recommend how long before ``t`` to start an empty system.

    ``model`` holds the time-reversed coefficients. The returned value is an
    upper confidence bound for the ``1 - epsilon_tv`` quantile of the age, on
    the original clock; the analytic bound is reported alongside.
    """
    if not 0 < epsilon_tv < 1:
        raise ValueError("epsilon_tv must lie in (0, 1)")
    batch = sample_triplets(model, t, n_trials, seed, algorithm, config, workers)
    ages, _ = rbm_states(x0, batch, t)
    env = model.require_envelope()
    bound = float(model.lam_inv(invert_warmup_bound(epsilon_tv, env)))
    plan = plan_from_ages(ages, epsilon_tv, bound)
    plan.tail_bound = np.array([warmup_bound(model.lam(u), env) for u in plan.tail_u])
    return plan
