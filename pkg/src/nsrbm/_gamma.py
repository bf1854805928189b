"""Compiled evaluation of the normalized drift.

A drift is held in a ``GammaTable`` namedtuple so that every sampling kernel
can take it as a single argument. Three layouts are supported:

* ``KIND_CONST``: ``gamma(u) = params[0]``
* ``KIND_COS``: ``gamma(u) = A cos(w u + phi) + B`` with ``params = [A, w, phi, B]``
* ``KIND_PANEL``: Chebyshev panels on ``knots``; periodic when ``period > 0``,
  otherwise constant beyond the last knot.
"""

from __future__ import annotations

import math
from collections import namedtuple

import numpy as np
from numba import njit

KIND_CONST = 0
KIND_COS = 1
KIND_PANEL = 2

GammaTable = namedtuple(
    "GammaTable",
    ["kind", "params", "knots", "coefs", "dcoefs", "icoefs", "cum", "cum2", "period", "gmax", "dgmax"],
)

_GL_X, _GL_W = np.polynomial.legendre.leggauss(32)
TWO_PI = 2.0 * math.pi


def make_table(kind, params=(0.0,), knots=None, coefs=None, dcoefs=None, icoefs=None,
               cum=None, cum2=None, period=0.0, gmax=0.0, dgmax=0.0):
    z1 = np.zeros(1)
    z2 = np.zeros((1, 1))
    return GammaTable(
        np.int64(kind),
        np.asarray(params, dtype=np.float64),
        z1 if knots is None else np.ascontiguousarray(knots, dtype=np.float64),
        z2 if coefs is None else np.ascontiguousarray(coefs, dtype=np.float64),
        z2 if dcoefs is None else np.ascontiguousarray(dcoefs, dtype=np.float64),
        z2 if icoefs is None else np.ascontiguousarray(icoefs, dtype=np.float64),
        z1 if cum is None else np.ascontiguousarray(cum, dtype=np.float64),
        z1 if cum2 is None else np.ascontiguousarray(cum2, dtype=np.float64),
        float(period),
        float(gmax),
        float(dgmax),
    )


@njit(cache=True)
def _clenshaw(c, x):
    b1 = 0.0
    b2 = 0.0
    for k in range(c.shape[0] - 1, 0, -1):
        b1, b2 = 2.0 * x * b1 - b2 + c[k], b1
    return x * b1 - b2 + c[0]


@njit(cache=True)
def _panel_index(knots, t):
    n = knots.shape[0] - 1
    i = np.searchsorted(knots, t, side="right") - 1
    if i < 0:
        i = 0
    if i > n - 1:
        i = n - 1
    return i


@njit(cache=True)
def _local_x(knots, i, t):
    lo = knots[i]
    hi = knots[i + 1]
    return (2.0 * t - lo - hi) / (hi - lo)


@njit(cache=True)
def _panel_value(tb, t, which):
    # which: 0 value, 1 derivative
    knots = tb.knots
    if tb.period > 0.0:
        t = t - tb.period * math.floor(t / tb.period)
    elif t >= knots[-1]:
        if which == 1:
            return 0.0
        i = knots.shape[0] - 2
        return _clenshaw(tb.coefs[i], 1.0)
    elif t < knots[0]:
        t = knots[0]
    i = _panel_index(knots, t)
    x = _local_x(knots, i, t)
    if which == 0:
        return _clenshaw(tb.coefs[i], x)
    return _clenshaw(tb.dcoefs[i], x)


@njit(cache=True)
def gamma(tb, t):
    if tb.kind == KIND_CONST:
        return tb.params[0]
    if tb.kind == KIND_COS:
        p = tb.params
        return p[0] * math.cos(p[1] * t + p[2]) + p[3]
    return _panel_value(tb, t, 0)


@njit(cache=True)
def dgamma(tb, t):
    if tb.kind == KIND_CONST:
        return 0.0
    if tb.kind == KIND_COS:
        p = tb.params
        return -p[0] * p[1] * math.sin(p[1] * t + p[2])
    return _panel_value(tb, t, 1)


@njit(cache=True)
def _panel_sq_partial(tb, i, t):
    # integral of gamma^2 over [knots[i], t]
    lo = tb.knots[i]
    if t <= lo:
        return 0.0
    half = 0.5 * (t - lo)
    mid = 0.5 * (t + lo)
    acc = 0.0
    for k in range(_GL_X.shape[0]):
        u = mid + half * _GL_X[k]
        g = _clenshaw(tb.coefs[i], _local_x(tb.knots, i, u))
        acc += _GL_W[k] * g * g
    return acc * half


@njit(cache=True)
def _panel_antider(tb, t, square):
    # integral from 0 of gamma (or gamma^2) up to t
    knots = tb.knots
    n = knots.shape[0] - 1
    cum = tb.cum2 if square else tb.cum
    base = 0.0
    if tb.period > 0.0:
        cycles = math.floor(t / tb.period)
        base = cycles * cum[n]
        t = t - cycles * tb.period
    elif t >= knots[n]:
        g_end = _clenshaw(tb.coefs[n - 1], 1.0)
        extra = g_end * g_end if square else g_end
        return cum[n] + extra * (t - knots[n])
    i = _panel_index(knots, t)
    if square:
        return base + cum[i] + _panel_sq_partial(tb, i, t)
    x = _local_x(knots, i, t)
    return base + cum[i] + _clenshaw(tb.icoefs[i], x)


@njit(cache=True)
def igamma(tb, s, t):
    """Integral of gamma over [s, t]."""
    if tb.kind == KIND_CONST:
        return tb.params[0] * (t - s)
    if tb.kind == KIND_COS:
        p = tb.params
        return p[0] / p[1] * (math.sin(p[1] * t + p[2]) - math.sin(p[1] * s + p[2])) + p[3] * (t - s)
    return _panel_antider(tb, t, False) - _panel_antider(tb, s, False)


@njit(cache=True)
def igamma2(tb, s, t):
    """Integral of gamma squared over [s, t]."""
    if tb.kind == KIND_CONST:
        return tb.params[0] ** 2 * (t - s)
    if tb.kind == KIND_COS:
        a, w, phi, b = tb.params[0], tb.params[1], tb.params[2], tb.params[3]
        cos2 = 0.5 * (t - s) + (math.sin(2.0 * (w * t + phi)) - math.sin(2.0 * (w * s + phi))) / (4.0 * w)
        cos1 = (math.sin(w * t + phi) - math.sin(w * s + phi)) / w
        return a * a * cos2 + 2.0 * a * b * cos1 + b * b * (t - s)
    if t - s < 1e-3 * (tb.knots[1] - tb.knots[0]):
        # short windows: direct quadrature avoids cancellation in the antiderivative
        half = 0.5 * (t - s)
        mid = 0.5 * (t + s)
        acc = 0.0
        for k in range(_GL_X.shape[0]):
            g = gamma(tb, mid + half * _GL_X[k])
            acc += _GL_W[k] * g * g
        return acc * half
    return _panel_antider(tb, t, True) - _panel_antider(tb, s, True)


@njit(cache=True)
def _cos_bounds(p, s, t):
    a, w, phi, b = p[0], p[1], p[2], p[3]
    th1 = w * s + phi
    th2 = w * t + phi
    if th2 - th1 >= TWO_PI:
        return abs(a) * w, abs(a) + abs(b)
    mt = max(abs(a * math.cos(th1) + b), abs(a * math.cos(th2) + b))
    k = math.ceil(th1 / math.pi)
    while k * math.pi <= th2:
        mt = max(mt, abs(a * math.cos(k * math.pi) + b))
        k += 1
    ms = max(abs(math.sin(th1)), abs(math.sin(th2)))
    k = math.ceil((th1 - 0.5 * math.pi) / math.pi)
    while k * math.pi + 0.5 * math.pi <= th2:
        ms = 1.0
        k += 1
    return abs(a) * w * ms, mt


@njit(cache=True)
def _panel_window_bounds(tb, i, lo, hi):
    c = tb.coefs[i]
    if c.shape[0] <= 2:
        g1 = _clenshaw(c, _local_x(tb.knots, i, lo))
        g2 = _clenshaw(c, _local_x(tb.knots, i, hi))
        return abs(tb.dcoefs[i][0]), max(abs(g1), abs(g2))
    return np.sum(np.abs(tb.dcoefs[i])), np.sum(np.abs(c))


@njit(cache=True)
def bounds(tb, s, t):
    """Return (m, m_tilde): upper bounds of |gamma'| and |gamma| on [s, t]."""
    if tb.kind == KIND_CONST:
        return 0.0, abs(tb.params[0])
    if tb.kind == KIND_COS:
        return _cos_bounds(tb.params, s, t)
    knots = tb.knots
    n = knots.shape[0] - 1
    if tb.period > 0.0:
        if t - s >= tb.period:
            return tb.dgmax, tb.gmax
        shift = tb.period * math.floor(s / tb.period)
        s0 = s - shift
        t0 = t - shift
        m = 0.0
        mt = 0.0
        while s0 < t0:
            i = _panel_index(knots, s0)
            hi = min(knots[i + 1], t0)
            dm, gm = _panel_window_bounds(tb, i, s0, hi)
            m = max(m, dm)
            mt = max(mt, gm)
            s0 = knots[i + 1]
            if i == n - 1:
                s0 -= tb.period
                t0 -= tb.period
        return m, mt
    m = 0.0
    mt = 0.0
    if t > knots[n]:
        mt = abs(_clenshaw(tb.coefs[n - 1], 1.0))
        t = knots[n]
    if s < knots[0]:
        s = knots[0]
    while s < t:
        i = _panel_index(knots, s)
        hi = min(knots[i + 1], t)
        dm, gm = _panel_window_bounds(tb, i, s, hi)
        m = max(m, dm)
        mt = max(mt, gm)
        s = knots[i + 1]
    return m, mt


@njit(cache=True)
def gamma_vec(tb, ts, which):
    out = np.empty(ts.shape[0])
    for k in range(ts.shape[0]):
        out[k] = gamma(tb, ts[k]) if which == 0 else dgamma(tb, ts[k])
    return out
