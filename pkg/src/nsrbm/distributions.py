"""Exact sampling primitives.

Everything random takes an explicit ``numpy.random.Generator``; the compiled
kernels (leading underscore) are shared by the path samplers in ``tdbm``,
``bridge`` and ``rbm``. Python-facing wrappers validate their arguments.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from numba import njit

LOG_2PI = math.log(2.0 * math.pi)
SQRT_2PI = math.sqrt(2.0 * math.pi)
PI = math.pi

# indices into the diagnostics counter array shared by the kernels
ST_SEGMENTS = 0
ST_PROPOSALS = 1
ST_REJECTIONS = 2
ST_SKELETON = 3
ST_FALLBACKS = 4
ST_EXIT_REJECTS = 5
ST_SKELETON_REJECTS = 6
N_STATS = 8

MAX_PAIRS = 10_000
# p-series switches to the eigenfunction expansion above this scaled time
_T_EIGEN = 0.25


# ---------------------------------------------------------------------------
# random streams


class RandomStream:
    """Counter-based Philox stream addressed by ``(seed, *key)``.

    The Philox key is the first two words of ``SeedSequence([seed, *key])``, so
    the stream for ``(seed, 3)`` never depends on how many other streams were
    drawn. ``spawn(i)`` extends the key path.
    """

    def __init__(self, seed: int, key: Sequence[int] = ()):
        if not 0 <= int(seed) < 2**64:
            raise ValueError("seed must be a 64-bit unsigned integer")
        self.seed = int(seed)
        self.key = tuple(int(k) for k in key)
        words = np.random.SeedSequence([self.seed, *self.key]).generate_state(2, dtype=np.uint64)
        self.generator = np.random.Generator(np.random.Philox(key=words))

    def spawn(self, *key: int) -> "RandomStream":
        return RandomStream(self.seed, self.key + tuple(key))

    def __repr__(self):
        return f"RandomStream(seed={self.seed}, key={self.key})"


def as_generator(rng) -> np.random.Generator:
    if isinstance(rng, RandomStream):
        return rng.generator
    if isinstance(rng, np.random.Generator):
        return rng
    return RandomStream(0 if rng is None else int(rng)).generator


# ---------------------------------------------------------------------------
# inverse Gaussian and exit times


@njit(cache=True)
def _ig(rng, mean, shape):
    # transformation with root selection; rearranged to avoid cancellation
    nu = rng.standard_normal()
    y = nu * nu
    my = mean * y
    x = mean - 2.0 * mean * my / (my + math.sqrt(4.0 * mean * shape * y + my * my))
    if rng.random() * (mean + x) <= mean:
        return x
    return mean * mean / x


@njit(cache=True)
def _a_term(n, x, t):
    k = n + 0.5
    if x <= t:
        return PI * k * (2.0 / (PI * x)) ** 1.5 * math.exp(-2.0 * k * k / x)
    return PI * k * math.exp(-k * k * PI * PI * x / 2.0)


@njit(cache=True)
def _jstar(rng):
    """Exit time of standard Brownian motion from (-1, 1)."""
    t = 0.64
    kk = PI * PI / 8.0
    p = 4.0 / PI * math.exp(-kk * t)
    q = 2.0 * math.erfc(1.0 / math.sqrt(2.0 * t))
    ct = math.sqrt(t)
    while True:
        if rng.random() * (p + q) < p:
            x = t + rng.exponential() / kk
        else:
            while True:
                e1 = rng.exponential()
                e2 = rng.exponential()
                if e1 * e1 <= 2.0 * e2 / t:
                    break
            z = 1.0 / ct + e1 * ct
            x = 1.0 / (z * z)
        s = _a_term(0, x, t)
        y = rng.random() * s
        n = 0
        while True:
            n += 1
            if n % 2 == 1:
                s -= _a_term(n, x, t)
                if y <= s:
                    return x
            else:
                s += _a_term(n, x, t)
                if y > s:
                    break


@njit(cache=True)
def _exit(rng, a):
    tau = a * a * _jstar(rng)
    side = 1.0 if rng.random() < 0.5 else -1.0
    return tau, side


# ---------------------------------------------------------------------------
# corridor series
#
# p(x, y, T): probability that a Brownian bridge from x to y over time T stays
# in (0, 2), conditioned on staying above 0.


@njit(cache=True)
def _log_neg_expm1(z):
    # log(1 - exp(-z)) for z > 0
    if z > 0.693:
        return math.log1p(-math.exp(-z))
    return math.log(-math.expm1(-z))


@njit(cache=True)
def _pair(x, y, T, j):
    """Magnitudes (A_j, B_j) of the j-th term pair; requires 0 <= x <= y, y > 0."""
    ca = 4.0 * j - y
    cb = 4.0 * j + y
    if x == 0.0:
        lra = math.log(ca / y)
        lrb = math.log(cb / y)
    else:
        den = _log_neg_expm1(2.0 * x * y / T)
        lra = _log_neg_expm1(2.0 * x * ca / T) - den
        lrb = _log_neg_expm1(2.0 * x * cb / T) - den
    ea = (8.0 * j * j - 4.0 * j * (x + y) + 2.0 * x * y) / T
    eb = (8.0 * j * j - 4.0 * j * (x - y)) / T
    return math.exp(lra - ea), math.exp(lrb - eb)


@njit(cache=True)
def _certified(x, y, T, j):
    # bracket after j pairs is valid once B_j >= A_{j+1} >= B_{j+1} >= ...
    c2 = math.log((4.0 * j + 4.0 - y) / (4.0 * j + y)) <= (2.0 - y) * (8.0 * j + 4.0 - 2.0 * x) / T
    j1 = j + 1.0
    c1 = math.log((4.0 * j1 + y) / (4.0 * j1 - y)) <= 2.0 * y * (4.0 * j1 - x) / T
    return c1 and c2


@njit(cache=True)
def _order(x, y):
    if x > y:
        return y, x
    return x, y


@njit(cache=True)
def _p_brackets(x, y, T, npairs):
    """Alternating-series bracket after ``npairs`` pairs (more if uncertified)."""
    x, y = _order(x, y)
    if y >= 2.0:
        return 0.0, 0.0, 0, True
    if y == 0.0:
        v, tail = _p_excursion(T)
        return max(v - tail, 0.0), min(v + tail, 1.0), 0, True
    s = 1.0
    j = 0
    lower = 0.0
    upper = 1.0
    while True:
        j += 1
        a, b = _pair(x, y, T, j)
        lower = s - a
        upper = lower + b
        s = upper
        ok = _certified(x, y, T, j)
        if (j >= npairs and ok) or j >= MAX_PAIRS:
            return max(lower, 0.0), min(upper, 1.0), j, ok


@njit(cache=True)
def _p_excursion(T):
    # both endpoints on the floor: sum_k (1 - 16 k^2 / T) exp(-8 k^2 / T)
    if T >= _T_EIGEN:
        kk = PI * PI * T / 8.0
        num = 0.0
        n = 1
        while True:
            term = (0.5 * n * PI) ** 2 * math.exp(-n * n * kk)
            num += term
            if term < 1e-300 or term < 1e-18 * num:
                break
            n += 1
        den = 2.0 / T / math.sqrt(2.0 * PI * T)
        tail = 4.0 * (0.5 * (n + 1) * PI) ** 2 * math.exp(-(n + 1) ** 2 * kk)
        return num / den, tail / den
    v = 1.0
    k = 1
    while True:
        term = 2.0 * (1.0 - 16.0 * k * k / T) * math.exp(-8.0 * k * k / T)
        v += term
        if abs(term) < 1e-18 and 16.0 * k * k > T:
            break
        k += 1
    return v, 1e-17


@njit(cache=True)
def _p_eigen(x, y, T):
    """Value and rigorous truncation bound from the sine expansion."""
    x, y = _order(x, y)
    kk = PI * PI * T / 8.0
    num = 0.0
    mag = 0.0
    n = 1
    while True:
        e = math.exp(-n * n * kk)
        if x > 0.0:
            term = math.sin(0.5 * n * PI * x) * math.sin(0.5 * n * PI * y) * e
        else:
            term = 0.5 * n * PI * math.sin(0.5 * n * PI * y) * e
        num += term
        mag += abs(term)
        fx = min(1.0, 0.5 * (n + 1) * PI * x) if x > 0.0 else 0.5 * (n + 1) * PI
        fy = min(1.0, 0.5 * (n + 1) * PI * y)
        bound = 2.0 * fx * fy * math.exp(-(n + 1) * (n + 1) * kk)
        if bound < 1e-17 * abs(num) or bound < 1e-300 or n > 400:
            break
        n += 1
    if x > 0.0:
        den = math.exp(-(y - x) ** 2 / (2.0 * T)) / math.sqrt(2.0 * PI * T) * -math.expm1(-2.0 * x * y / T)
    else:
        den = 2.0 * y / T * math.exp(-y * y / (2.0 * T)) / math.sqrt(2.0 * PI * T)
    # truncation plus accumulated rounding in the partial sums
    return num / den, (bound + 4e-16 * n * mag) / den


@njit(cache=True)
def _p_value(x, y, T):
    x, y = _order(x, y)
    if y >= 2.0:
        return 0.0
    if y == 0.0:
        return min(max(_p_excursion(T)[0], 0.0), 1.0)
    if T >= _T_EIGEN:
        v = _p_eigen(x, y, T)[0]
    else:
        s = 1.0
        j = 0
        while True:
            j += 1
            a, b = _pair(x, y, T, j)
            s += b - a
            if (a < 1e-18 and _certified(x, y, T, j)) or j >= MAX_PAIRS:
                break
        v = s
    return min(max(v, 0.0), 1.0)


@njit(cache=True)
def _bern_p(x, y, T, u):
    """Exact event {u < p(x, y, T)}. Returns 0/1, or 2/3 when decided by midpoint fallback."""
    x, y = _order(x, y)
    if y >= 2.0:
        return 0
    if T >= _T_EIGEN or y == 0.0:
        if y == 0.0:
            v, tail = _p_excursion(T)
        else:
            v, tail = _p_eigen(x, y, T)
        if u < v - tail:
            return 1
        if u > v + tail:
            return 0
        return 3 if u < v else 2
    s = 1.0
    j = 0
    while True:
        j += 1
        a, b = _pair(x, y, T, j)
        lower = s - a
        upper = lower + b
        s = upper
        if _certified(x, y, T, j):
            if u < lower:
                return 1
            if u > upper:
                return 0
        if j >= MAX_PAIRS:
            return 3 if u < 0.5 * (lower + upper) else 2


@njit(cache=True)
def _bern_corridor(rng, x, y, T, stats):
    """Exact event {bridge x->y over T stays inside (0, 2)} for x, y in [0, 2]."""
    if x <= 0.0 or y <= 0.0 or x >= 2.0 or y >= 2.0:
        return False
    if rng.random() >= -math.expm1(-2.0 * x * y / T):
        return False
    r = _bern_p(x, y, T, rng.random())
    if r >= 2:
        stats[ST_FALLBACKS] += 1
    return (r & 1) == 1


@njit(cache=True)
def _stay_below(xp, yp, h, L):
    """P(bridge xp->yp over h stays below L | it stays above 0)."""
    if xp >= L or yp >= L:
        return 0.0
    if math.isinf(L):
        return 1.0
    sc = 2.0 / L
    return _p_value(sc * xp, sc * yp, sc * sc * h)


# ---------------------------------------------------------------------------
# skeletons


@njit(cache=True)
def _skeleton_given_exit(rng, tau, kap, nk, a, side, stats):
    """W at kap[:nk] given first exit from (-a, a) at time tau on ``side``.

    Reversed and rescaled, ``1 - side W(tau - t) / a`` is a three-dimensional
    Bessel bridge from 0 to 1 kept below 2; Bessel-bridge proposals are the
    norms of a 3-d Brownian bridge and are accepted interval by interval.
    """
    out = np.empty(nk)
    if nk == 0:
        return out
    T = tau / (a * a)
    r = np.empty(nk)
    for i in range(nk):
        r[i] = (tau - kap[nk - 1 - i]) / (a * a)
    R = np.empty(nk)
    while True:
        px = 0.0
        py = 0.0
        pz = 0.0
        tp = 0.0
        prev = 0.0
        ok = True
        for i in range(nk):
            t = r[i]
            rem = T - tp
            frac = (t - tp) / rem
            sd = math.sqrt(max((t - tp) * (T - t) / rem, 0.0))
            px += frac * (1.0 - px) + sd * rng.standard_normal()
            py += -frac * py + sd * rng.standard_normal()
            pz += -frac * pz + sd * rng.standard_normal()
            cur = math.sqrt(px * px + py * py + pz * pz)
            R[i] = cur
            if cur >= 2.0 or not _bern_corridor_from(rng, prev, cur, t - tp, stats):
                ok = False
                break
            prev = cur
            tp = t
        if ok and _bern_corridor_from(rng, prev, 1.0, T - tp, stats):
            break
        stats[ST_SKELETON_REJECTS] += 1
    for i in range(nk):
        out[nk - 1 - i] = side * a * (1.0 - R[i])
    return out


@njit(cache=True)
def _bern_corridor_from(rng, x, y, T, stats):
    # Bessel-bridge pieces are already conditioned positive: accept with p alone
    if x >= 2.0 or y >= 2.0:
        return False
    if T <= 0.0:
        return True
    r = _bern_p(x, y, T, rng.random())
    if r >= 2:
        stats[ST_FALLBACKS] += 1
    return (r & 1) == 1


@njit(cache=True)
def _skeleton_no_exit(rng, kap, nk, x, dur, a, stats):
    """Bridge 0 -> x over ``dur`` at kap[:nk], conditioned to stay in (-a, a)."""
    out = np.empty(nk)
    if nk == 0:
        return out
    while True:
        tp = 0.0
        wp = 0.0
        ok = True
        for i in range(nk):
            t = kap[i]
            rem = dur - tp
            mean = wp + (t - tp) / rem * (x - wp)
            sd = math.sqrt(max((t - tp) * (dur - t) / rem, 0.0))
            w = mean + sd * rng.standard_normal()
            if abs(w) >= a or not _bern_corridor(rng, 1.0 + wp / a, 1.0 + w / a, (t - tp) / (a * a), stats):
                ok = False
                break
            out[i] = w
            wp = w
            tp = t
        if ok and _bern_corridor(rng, 1.0 + wp / a, 1.0 + x / a, (dur - tp) / (a * a), stats):
            return out
        stats[ST_SKELETON_REJECTS] += 1


@njit(cache=True)
def _poisson_times(rng, rate, horizon, buf):
    n = 0
    if rate <= 0.0:
        return buf, 0
    t = rng.exponential() / rate
    while t < horizon:
        if n == buf.shape[0]:
            nb = np.empty(2 * n)
            nb[:n] = buf
            buf = nb
        buf[n] = t
        n += 1
        t += rng.exponential() / rate
    return buf, n


# ---------------------------------------------------------------------------
# piece maxima and argmax


@njit(cache=True)
def _piece_cdf(m, x, y, h, lo, hi):
    """P(max <= m) for a bridge x->y over h conditioned to stay in (lo, hi)."""
    if m <= max(x, y):
        return 0.0
    if m >= hi:
        return 1.0
    if math.isinf(lo):
        f = -math.expm1(-2.0 * (m - x) * (m - y) / h)
        if math.isinf(hi):
            return f
        return f / -math.expm1(-2.0 * (hi - x) * (hi - y) / h)
    num = _stay_below(x - lo, y - lo, h, m - lo)
    if math.isinf(hi):
        return num
    den = _stay_below(x - lo, y - lo, h, hi - lo)
    if den <= 0.0:
        return 0.0
    return min(num / den, 1.0)


@njit(cache=True)
def _piece_max_above(rng, rec, x, y, h, lo, hi):
    """Draw the piece maximum if it exceeds ``rec``; returns (exceeded, max)."""
    top = max(x, y)
    if hi <= rec or h <= 0.0:
        if top > rec:
            return True, top
        return False, rec
    u = rng.random()
    if rec > top and u <= _piece_cdf(rec, x, y, h, lo, hi):
        return False, rec
    if math.isinf(lo):
        if math.isinf(hi):
            e = -0.5 * h * math.log1p(-u)
        else:
            e = -0.5 * h * math.log1p(u * math.expm1(-2.0 * (hi - x) * (hi - y) / h))
        return True, 0.5 * (x + y) + math.sqrt(0.25 * (x - y) ** 2 + e)
    a = max(rec, top)
    la = x - lo
    lb = y - lo
    den = 1.0 if math.isinf(hi) else _stay_below(la, lb, h, hi - lo)
    target = u * den
    fa = -target
    if math.isinf(hi):
        b = a + math.sqrt(h) + 1e-300
        fb = _stay_below(la, lb, h, b - lo) - target
        while fb < 0.0:
            step = 2.0 * (b - a)
            a, fa = b, fb
            b = a + step
            fb = _stay_below(la, lb, h, b - lo) - target
    else:
        b = hi
        fb = den - target
    # Illinois false position on F(m) = u; the bracket shrinks every step
    side = 0
    tol = 1e-14 * (abs(a) + abs(b) + 1e-300)
    for _ in range(200):
        if b - a <= tol:
            break
        m = (a * fb - b * fa) / (fb - fa)
        if not a < m < b:
            m = 0.5 * (a + b)
        fm = _stay_below(la, lb, h, m - lo) - target
        if fm == 0.0:
            return True, m
        if fm < 0.0:
            a, fa = m, fm
            if side == -1:
                fb *= 0.5
            side = -1
        else:
            b, fb = m, fm
            if side == 1:
                fa *= 0.5
            side = 1
    return True, 0.5 * (a + b)


@njit(cache=True)
def _log_fp(t, u, c):
    """Log first-passage density to a level ``u`` above the start, killed ``c`` below that level.

    ``u == c`` gives the limit density per unit distance from the floor;
    ``c = inf`` is the free first-passage density.
    """
    if t <= 0.0:
        return -np.inf
    if math.isinf(c):
        return math.log(u) - 1.5 * math.log(t) - u * u / (2.0 * t) - 0.5 * LOG_2PI
    d = c - u
    if t < 0.1 * c * c:
        base = -1.5 * math.log(t) - 0.5 * LOG_2PI
        if d >= 0.5 * c:
            acc = 1.0
            for k in range(-3, 4):
                if k == 0:
                    continue
                w = u + 2.0 * k * c
                acc += w / u * math.exp(-(w * w - u * u) / (2.0 * t))
            return base + math.log(u) - u * u / (2.0 * t) + math.log(acc)
        # pair terms (2k+1)c -+ d to keep precision near the floor
        lead = 0.0
        acc = 0.0
        for k in range(4):
            v = (2.0 * k + 1.0) * c
            if d > 0.0:
                y = v * d / t
                e2 = math.exp(-2.0 * y)
                inner = -v * math.expm1(-2.0 * y) - d * (1.0 + e2)
                if inner <= 0.0:
                    continue
                lt = y + math.log(inner) - (v * v + d * d) / (2.0 * t)
            else:
                inner = v * v / t - 1.0
                if inner <= 0.0:
                    continue
                lt = math.log(2.0 * inner) - v * v / (2.0 * t)
            if k == 0:
                lead = lt
                acc = 1.0
            else:
                acc += math.exp(lt - lead)
        return base + lead + math.log(acc)
    kk = PI * PI * t / (2.0 * c * c)
    acc = 0.0
    for n in range(1, 60):
        sgn = 1.0 if n % 2 == 1 else -1.0
        if d == 0.0:
            coef = sgn * n * n * PI / c
        elif d < 0.5 * c:
            coef = n * sgn * math.sin(n * PI * d / c)
        else:
            coef = n * math.sin(n * PI * u / c)
        term = coef * math.exp(-(n * n - 1) * kk)
        acc += term
        if n > 2 and math.exp(-(n * n - 1) * kk) * n * n < 1e-18 * abs(acc):
            break
    if acc <= 0.0:
        return -np.inf
    return math.log(PI / (c * c)) - kk + math.log(acc)


@njit(cache=True)
def _log_argmax_density(rho, h, uL, uR, c):
    return _log_fp(rho, uL, c) + _log_fp(h - rho, uR, c)


_GK_X = np.array([0.991455371120812639, 0.949107912342758525, 0.864864423359769073, 0.741531185599394440,
                  0.586087235467691130, 0.405845151377397167, 0.207784955007898468, 0.0])
_GK_WK = np.array([0.022935322010529225, 0.063092092629978553, 0.104790010322250184, 0.140653259715525919,
                   0.169004726639267903, 0.190350578064785410, 0.204432940075298892, 0.209482141084727828])
_GK_WG = np.array([0.129484966168869693, 0.279705391489276668, 0.381830050505118945, 0.417959183673469388])


@njit(cache=True)
def _gk15(a, b, h, uL, uR, c, shift):
    mid = 0.5 * (a + b)
    half = 0.5 * (b - a)
    k = 0.0
    g = 0.0
    for i in range(8):
        if i == 7:
            f = math.exp(_log_argmax_density(mid, h, uL, uR, c) - shift)
            k += _GK_WK[i] * f
            g += _GK_WG[3] * f
        else:
            dx = half * _GK_X[i]
            f = math.exp(_log_argmax_density(mid - dx, h, uL, uR, c) - shift) \
                + math.exp(_log_argmax_density(mid + dx, h, uL, uR, c) - shift)
            k += _GK_WK[i] * f
            if i % 2 == 1:
                g += _GK_WG[i // 2] * f
    return k * half, abs(k - g) * half


@njit(cache=True)
def _argmax_numeric(rng, h, uL, uR, c):
    """Location of the maximum in (0, h) by inversion of its density."""
    # graded initial mesh: both ends can carry sharp features
    grid = np.empty(49)
    for k in range(20):
        grid[k] = 0.5 * h * 4.0 ** (k - 20)
        grid[48 - k] = h - 0.5 * h * 4.0 ** (k - 20)
    for k in range(9):
        grid[20 + k] = 0.25 * h + 0.5 * h * k / 8.0
    grid[0] = 0.0
    grid[48] = h
    grid = np.sort(grid)
    edges = [grid[0]]
    for k in range(1, 49):
        if grid[k] > edges[-1]:
            edges.append(grid[k])
    shift = -np.inf
    for e in edges:
        if 0.0 < e < h:
            shift = max(shift, _log_argmax_density(e, h, uL, uR, c))
    if not shift > -np.inf:
        return 0.5 * h
    # adaptive refinement; each panel's integral is computed once
    lo_l = []
    hi_l = []
    val_l = []
    err_l = []
    total = 0.0
    for i in range(len(edges) - 1):
        v, err = _gk15(edges[i], edges[i + 1], h, uL, uR, c, shift)
        lo_l.append(edges[i])
        hi_l.append(edges[i + 1])
        val_l.append(v)
        err_l.append(err)
        total += v
    tol = 1e-12 * total
    i = 0
    while i < len(lo_l):
        a = lo_l[i]
        b = hi_l[i]
        if err_l[i] > tol and b - a > 1e-15 * h and len(lo_l) < 20000:
            m = 0.5 * (a + b)
            v1, e1 = _gk15(a, m, h, uL, uR, c, shift)
            v2, e2 = _gk15(m, b, h, uL, uR, c, shift)
            hi_l[i] = m
            val_l[i] = v1
            err_l[i] = e1
            lo_l.append(m)
            hi_l.append(b)
            val_l.append(v2)
            err_l.append(e2)
        else:
            i += 1
    n = len(lo_l)
    order = np.argsort(np.array(lo_l))
    cum = np.empty(n + 1)
    cum[0] = 0.0
    for i in range(n):
        cum[i + 1] = cum[i] + val_l[order[i]]
    target = rng.random() * cum[n]
    idx = np.searchsorted(cum, target, side="right") - 1
    if idx >= n:
        idx = n - 1
    j = order[idx]
    a = lo_l[j]
    b = hi_l[j]
    need = min(max(target - cum[idx], 0.0), val_l[j])
    # safeguarded Newton on the panel's cumulative integral
    left = a
    right = b
    x = a + (b - a) * need / val_l[j] if val_l[j] > 0.0 else 0.5 * (a + b)
    for _ in range(100):
        f = _gk15(a, x, h, uL, uR, c, shift)[0] - need
        if abs(f) <= 1e-14 * total:
            return x
        if f < 0.0:
            left = x
        else:
            right = x
        dens = math.exp(_log_argmax_density(x, h, uL, uR, c) - shift)
        step = x - f / dens if dens > 0.0 else 0.5 * (left + right)
        if not left < step < right:
            step = 0.5 * (left + right)
        if step == x or right - left <= 1e-15 * h:
            return step
        x = step
    return x


@njit(cache=True)
def _argmax_free(rng, h, c1, c2):
    """Argmax of an unconstrained bridge whose maximum sits c1, c2 above its ends."""
    if rng.random() * (c1 + c2) < c2:
        v = _ig(rng, c1 / c2, c1 * c1 / h)
    else:
        v = 1.0 / _ig(rng, c2 / c1, c2 * c2 / h)
    return h * v / (1.0 + v)


# record layout: [kind, t0, x0, t1, x1, lo, M, floor_end]
REC_POINT = 0.0
REC_PIECE = 1.0


@njit(cache=True)
def _set_point(piece, t, value):
    piece[0] = REC_POINT
    piece[1] = t
    piece[6] = value


@njit(cache=True)
def _set_piece(piece, t0, x0, t1, x1, lo, M, floor_end):
    piece[0] = REC_PIECE
    piece[1] = t0
    piece[2] = x0
    piece[3] = t1
    piece[4] = x1
    piece[5] = lo
    piece[6] = M
    piece[7] = 1.0 if floor_end else 0.0


_FREE_TRIES = 200


@njit(cache=True)
def _argmax_killed(rng, h, uL, uR, c):
    """Argmax with a floor ``c`` below the maximum, by rejection from the free law.

    Killed first-passage densities never exceed free ones, so each factor of
    the ratio is at most one. After a capped number of tries the numeric
    inverter takes over, which leaves the output law unchanged.
    """
    if h <= 2.0 * c * c:
        for _ in range(_FREE_TRIES):
            rho = _argmax_free(rng, h, uL, uR)
            if not 0.0 < rho < h:
                continue
            lr = (_log_fp(rho, uL, c) - _log_fp(rho, uL, np.inf)
                  + _log_fp(h - rho, uR, c) - _log_fp(h - rho, uR, np.inf))
            if math.log(rng.random()) < lr:
                return rho
    return _argmax_numeric(rng, h, uL, uR, c)


@njit(cache=True)
def _resolve_argmax(rng, piece):
    if piece[0] == REC_POINT:
        return piece[1]
    t0, x0, t1, x1, lo, M = piece[1], piece[2], piece[3], piece[4], piece[5], piece[6]
    h = t1 - t0
    if math.isinf(lo):
        return t0 + _argmax_free(rng, h, M - x0, M - x1)
    c = M - lo
    if piece[7] == 1.0:
        return t0 + _argmax_numeric(rng, h, M - x0, c, c)
    return t0 + _argmax_killed(rng, h, M - x0, M - x1, c)


@njit(cache=True)
def _scan_pieces(rng, s, z, a, ts, ws, n, side_exit, rec, piece):
    """Update the running record with the maxima of one accepted segment.

    ``ts[0..n]``/``ws[0..n]`` hold the skeleton relative to ``(s, z)`` with
    ``ts[0] = 0`` and ``ts[n]`` the segment end. ``side_exit`` is +1/-1 for an
    exit through the top/bottom and 0 when the corridor was not left.
    """
    top = z + a
    if top <= rec:
        return rec
    if side_exit > 0.0:
        _set_point(piece, s + ts[n], top)
        return top
    lo = z - a
    for i in range(n):
        x0 = z + ws[i]
        floor_end = side_exit < 0.0 and i == n - 1
        x1 = lo if floor_end else z + ws[i + 1]
        exceeded, M = _piece_max_above(rng, rec, x0, x1, ts[i + 1] - ts[i], lo, top)
        if exceeded:
            rec = M
            _set_piece(piece, s + ts[i], x0, s + ts[i + 1], x1, lo, M, floor_end)
    return rec


# ---------------------------------------------------------------------------
# Python-facing wrappers


@dataclass(frozen=True)
class ExitSample:
    tau: float
    endpoint_sign: int


@dataclass(frozen=True)
class SeriesBounds:
    lower: float
    upper: float
    terms_used: int


def _finite(*vals):
    for v in vals:
        if not np.isfinite(v):
            raise ValueError("parameters must be finite")


def sample_inverse_gaussian(mean: float, shape: float, rng, size=None):
    """Inverse Gaussian variate(s) with the given mean and shape."""
    _finite(mean, shape)
    if not (mean > 0 and shape > 0):
        raise ValueError("mean and shape must be positive")
    g = as_generator(rng)
    if size is None:
        return float(_ig(g, float(mean), float(shape)))
    return _ig_many(g, float(mean), float(shape), int(size))


@njit(cache=True)
def _ig_many(rng, mean, shape, n):
    out = np.empty(n)
    for i in range(n):
        out[i] = _ig(rng, mean, shape)
    return out


@njit(cache=True)
def _exit_many(rng, a, n):
    tau = np.empty(n)
    side = np.empty(n)
    for i in range(n):
        tau[i], side[i] = _exit(rng, a)
    return tau, side


def sample_exit_time(a: float, rng, size=None):
    """First exit of standard Brownian motion from ``(-a, a)``."""
    if not a > 0:
        raise ValueError("a must be positive")
    g = as_generator(rng)
    if size is None:
        tau, side = _exit(g, float(a))
        return ExitSample(float(tau), int(side))
    return _exit_many(g, float(a), int(size))


def _new_stats():
    return np.zeros(N_STATS, dtype=np.int64)


def sample_skeleton_given_exit(tau: float, kappas, a: float, rng, side: int = 1) -> np.ndarray:
    """Values of ``W`` at ``kappas`` given it first leaves ``(-a, a)`` at ``tau`` through ``side * a``."""
    k = np.asarray(kappas, dtype=float)
    if k.size and (np.any(np.diff(k) <= 0) or k[0] <= 0 or k[-1] >= tau):
        raise ValueError("kappas must be strictly ascending inside (0, tau)")
    return _skeleton_given_exit(as_generator(rng), float(tau), k, k.size, float(a), float(side), _new_stats())


def sample_meander_max(left, right, floor, rng, ceiling=math.inf):
    """Joint (max, argmax) of a bridge between ``left`` and ``right`` kept above ``floor``.

    ``left``/``right`` are ``(time, value)`` pairs. An optional ``ceiling``
    additionally conditions the path to stay below it.
    """
    (t0, x0), (t1, x1) = left, right
    if t1 < t0:
        raise ValueError("right time precedes left time")
    if x0 <= floor or x1 <= floor or x0 >= ceiling or x1 >= ceiling:
        raise ValueError("endpoint values must lie strictly inside (floor, ceiling)")
    if t1 == t0:
        return float(x0), float(t0)
    g = as_generator(rng)
    return _meander_max(g, float(t0), float(x0), float(t1), float(x1), float(floor), float(ceiling))


@njit(cache=True)
def _meander_max(rng, t0, x0, t1, x1, lo, hi):
    piece = np.zeros(8)
    _, M = _piece_max_above(rng, -np.inf, x0, x1, t1 - t0, lo, hi)
    _set_piece(piece, t0, x0, t1, x1, lo, M, False)
    return M, _resolve_argmax(rng, piece)


def _check_p_domain(s, x, t, y):
    if not (0 <= x <= 2 and 0 <= y <= 2 and s < t):
        raise ValueError("p-series needs x, y in [0, 2] and s < t")


def eval_p_series(s: float, x: float, t: float, y: float, n_pairs: int = 1) -> SeriesBounds:
    """Alternating-series bracket for the corridor probability after ``n_pairs`` term pairs.

    Brackets are only reported once the series is certified to alternate with
    decreasing terms, so more pairs than requested may be used.
    """
    _check_p_domain(s, x, t, y)
    lo, hi, used, _ = _p_brackets(float(x), float(y), float(t - s), int(n_pairs))
    return SeriesBounds(float(lo), float(hi), int(used))


def p_value(s: float, x: float, t: float, y: float) -> float:
    _check_p_domain(s, x, t, y)
    return float(_p_value(float(x), float(y), float(t - s)))


def bernoulli_p_series(s: float, x: float, t: float, y: float, u: float) -> bool:
    """Decide ``u < p(s, x; t, y)`` exactly."""
    _check_p_domain(s, x, t, y)
    if not 0 <= u <= 1:
        raise ValueError("u must lie in [0, 1]")
    return bool(_bern_p(float(x), float(y), float(t - s), float(u)) & 1)


def sample_bridge_point(t_query: float, left, right, rng) -> float:
    """Brownian bridge value at ``t_query`` between ``(time, value)`` pairs."""
    (t0, x0), (t1, x1) = left, right
    if not t0 <= t_query <= t1 or t0 == t1:
        raise ValueError("query time must lie between the endpoint times")
    g = as_generator(rng)
    frac = (t_query - t0) / (t1 - t0)
    var = (t_query - t0) * (t1 - t_query) / (t1 - t0)
    return float(x0 + frac * (x1 - x0) + math.sqrt(var) * g.standard_normal())
