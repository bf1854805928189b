"""Coefficient descriptors, time change, time reversal and drift envelopes.

The diffusion ``dX = mu(t) dt + sigma(t) dB`` is reduced to unit volatility by
the clock ``Lambda(t) = int_0^t sigma^2``. In the new clock the drift is
``gamma(u) = mu(Lambda^{-1}(u)) / sigma^2(Lambda^{-1}(u))``, which is what the
samplers consume through a compiled :class:`~nsrbm._gamma.GammaTable`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from numpy.polynomial import chebyshev as C
from scipy import integrate, optimize

from . import _gamma
from ._gamma import KIND_CONST, KIND_COS, KIND_PANEL


class ModelError(ValueError):
    """Raised when a model violates a standing assumption."""


# ---------------------------------------------------------------------------
# coefficient descriptors


class Coefficient:
    """A real function of time with its derivative and antiderivative."""

    kind = "abstract"
    period: Optional[float] = None
    # time beyond which the function is constant (None: never)
    extent: Optional[float] = None

    def __call__(self, t):
        raise NotImplementedError

    def derivative(self, t):
        raise NotImplementedError

    def integral(self, t):
        """Integral over ``[0, t]``."""
        t = float(t)
        return integrate.quad(self, 0.0, t, limit=200, epsabs=1e-13, epsrel=1e-13)[0]

    def reversed(self, t: float) -> "Coefficient":
        raise NotImplementedError

    def describe(self) -> dict:
        return {"kind": self.kind}


@dataclass(frozen=True)
class Constant(Coefficient):
    value: float
    kind = "constant"

    def __call__(self, t):
        return self.value + 0.0 * np.asarray(t, dtype=float)

    def derivative(self, t):
        return 0.0 * np.asarray(t, dtype=float)

    def integral(self, t):
        return self.value * t

    def reversed(self, t):
        return self

    def describe(self):
        return {"kind": self.kind, "value": self.value}


@dataclass(frozen=True)
class CosineAffine(Coefficient):
    """``amplitude * cos(2 pi frequency t + phase) + offset``."""

    amplitude: float
    frequency: float
    offset: float
    phase: float = 0.0
    kind = "cosine"

    def __post_init__(self):
        if not self.frequency > 0:
            raise ModelError("cosine frequency must be positive")

    @property
    def period(self):
        return 1.0 / self.frequency

    @property
    def omega(self):
        return 2.0 * math.pi * self.frequency

    def __call__(self, t):
        return self.amplitude * np.cos(self.omega * np.asarray(t, dtype=float) + self.phase) + self.offset

    def derivative(self, t):
        return -self.amplitude * self.omega * np.sin(self.omega * np.asarray(t, dtype=float) + self.phase)

    def integral(self, t):
        w = self.omega
        return self.amplitude / w * (math.sin(w * t + self.phase) - math.sin(self.phase)) + self.offset * t

    def reversed(self, t):
        # a cos(w (t - r) + phi) = a cos(w r - (w t + phi))
        ph = -(self.omega * t + self.phase)
        ph = math.remainder(ph, 2.0 * math.pi)
        if abs(ph) < 1e-14:
            ph = 0.0
        return CosineAffine(self.amplitude, self.frequency, self.offset, ph)

    def describe(self):
        return {"kind": self.kind, "amplitude": self.amplitude, "frequency": self.frequency,
                "offset": self.offset, "phase": self.phase}


class PiecewiseLinear(Coefficient):
    """Linear interpolation through ``(knots, values)``.

    Without a period the function is held constant outside the knots. With a
    period the knots must span ``[0, period]`` and the ends must agree.
    """

    kind = "piecewise-linear"

    def __init__(self, knots, values, period=None):
        knots = np.asarray(knots, dtype=float)
        values = np.asarray(values, dtype=float)
        if knots.ndim != 1 or knots.shape != values.shape or knots.size < 2:
            raise ModelError("piecewise-linear needs matching knot and value lists of length >= 2")
        if np.any(np.diff(knots) <= 0):
            raise ModelError("piecewise-linear knots must be strictly increasing")
        if period is not None:
            if abs(knots[0]) > 1e-12 or abs(knots[-1] - period) > 1e-12:
                raise ModelError("periodic piecewise-linear knots must span [0, period]")
            if abs(values[0] - values[-1]) > 1e-12:
                raise ModelError("periodic piecewise-linear values must match at the ends")
        self.knots = knots
        self.values = values
        self.period = None if period is None else float(period)
        self.extent = None if period is not None else float(knots[-1])
        self._slopes = np.diff(values) / np.diff(knots)

    def _wrap(self, t):
        t = np.asarray(t, dtype=float)
        if self.period is not None:
            return np.mod(t, self.period)
        return t

    def __call__(self, t):
        return np.interp(self._wrap(t), self.knots, self.values)

    def derivative(self, t):
        u = self._wrap(t)
        idx = np.clip(np.searchsorted(self.knots, u, side="right") - 1, 0, self.knots.size - 2)
        inside = (u >= self.knots[0]) & (u < self.knots[-1])
        return np.where(inside, self._slopes[idx], 0.0)

    def _cumulative(self):
        seg = 0.5 * (self.values[1:] + self.values[:-1]) * np.diff(self.knots)
        return np.concatenate([[0.0], np.cumsum(seg)])

    def _antider(self, t):
        # integral from knots[0] (with constant extension on both sides)
        k, v = self.knots, self.values
        if t <= k[0]:
            return v[0] * (t - k[0])
        if t >= k[-1]:
            return self._cumulative()[-1] + v[-1] * (t - k[-1])
        i = int(np.searchsorted(k, t, side="right") - 1)
        dt = t - k[i]
        return self._cumulative()[i] + v[i] * dt + 0.5 * self._slopes[i] * dt * dt

    def integral(self, t):
        if self.period is not None:
            cycles = math.floor(t / self.period)
            full = self._cumulative()[-1]
            return cycles * full + self._antider(t - cycles * self.period)
        return self._antider(t) - self._antider(0.0)

    def reversed(self, t):
        if self.period is not None:
            b = t % self.period
            new_knots = np.unique(np.concatenate([[0.0, self.period], np.mod(b - self.knots, self.period)]))
            return PiecewiseLinear(new_knots, self(b - new_knots), period=self.period)
        pts = [0.0, t] + [t - k for k in self.knots if 0.0 <= t - k <= t]
        new_knots = np.unique(np.asarray(pts, dtype=float))
        return PiecewiseLinear(new_knots, self(t - new_knots))

    def describe(self):
        return {"kind": self.kind, "knots": self.knots.tolist(), "values": self.values.tolist(),
                "period": self.period}


class UserFunction(Coefficient):
    """A user callable with its derivative.

    ``period`` declares periodicity; otherwise ``extent`` declares a time after
    which the function is constant (required for non-periodic drift models).
    """

    kind = "callable"

    def __init__(self, func: Callable, derivative: Callable, period=None, extent=None, name="callable"):
        self.func = func
        self.dfunc = derivative
        self.period = None if period is None else float(period)
        self.extent = None if extent is None else float(extent)
        self.name = name

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        if self.extent is not None:
            t = np.minimum(t, self.extent)
        return np.vectorize(self.func, otypes=[float])(t)

    def derivative(self, t):
        t = np.asarray(t, dtype=float)
        out = np.vectorize(self.dfunc, otypes=[float])(np.minimum(t, self.extent) if self.extent else t)
        if self.extent is not None:
            out = np.where(t >= self.extent, 0.0, out)
        return out

    def reversed(self, t):
        if self.period is not None:
            b = t % self.period
            return UserFunction(lambda r, f=self.func, b=b: f(b - r),
                                lambda r, g=self.dfunc, b=b: -g(b - r), period=self.period, name=self.name)
        f, g = self.func, self.dfunc
        return UserFunction(lambda r: f(t - r), lambda r: -g(t - r), extent=t, name=self.name)

    def describe(self):
        return {"kind": self.kind, "name": self.name, "period": self.period, "extent": self.extent}


def _common_period(*coefs):
    periods = [c.period for c in coefs if not isinstance(c, Constant)]
    if not periods or any(p is None for p in periods):
        return None
    p = max(periods)
    for q in periods:
        ratio = p / q
        if abs(ratio - round(ratio)) > 1e-9:
            return None
    return p


@dataclass
class CoefficientSpec:
    """Drift ``mu`` and variance ``sigma2`` of the free process."""

    mu: Coefficient
    sigma2: Coefficient = field(default_factory=lambda: Constant(1.0))

    def __post_init__(self):
        if self.sigma2 is None:
            raise ModelError("sigma2 is required")
        if isinstance(self.sigma2, Constant) and not self.sigma2.value > 0:
            raise ModelError("sigma2 must be positive")

    @property
    def period(self):
        return _common_period(self.mu, self.sigma2)

    @property
    def kind(self):
        return self.mu.kind if isinstance(self.sigma2, Constant) else f"{self.mu.kind}/{self.sigma2.kind}"

    def mu_prime(self, t):
        return self.mu.derivative(t)

    def sigma2_prime(self, t):
        return self.sigma2.derivative(t)

    def describe(self):
        return {"mu": self.mu.describe(), "sigma2": self.sigma2.describe()}


def reverse_spec(spec: CoefficientSpec, t: float) -> CoefficientSpec:
    """Coefficients of the process run backwards from horizon ``t``.

    For periodic models and ``t = inf`` the reversal is taken at phase zero
    (an integer number of periods), which is what the stationary limit sees.
    """
    if math.isinf(t):
        period = spec.period
        if period is None and not (isinstance(spec.mu, Constant) and isinstance(spec.sigma2, Constant)):
            raise ModelError("infinite-horizon reversal requires periodicity")
        t = 0.0
    elif not t > 0:
        raise ModelError("reversal horizon must be positive")
    return CoefficientSpec(spec.mu.reversed(t), spec.sigma2.reversed(t))


# ---------------------------------------------------------------------------
# normalized model


@dataclass(frozen=True)
class EnvelopeParams:
    """Linear envelope ``int_s^t gamma <= d - (t - s) gamma_bar``."""

    d: float
    gamma_bar: float

    def working_d(self, floor_factor: float = 0.5) -> float:
        """Intercept used by the samplers; a zero intercept is lifted to a positive one."""
        if self.d > 0:
            return self.d
        return floor_factor / self.gamma_bar


@dataclass(frozen=True)
class LocalBounds:
    m: float
    m_tilde: float


@dataclass
class NormalizedModel:
    """Unit-volatility representation of a :class:`CoefficientSpec`."""

    spec: CoefficientSpec
    table: _gamma.GammaTable
    envelope: Optional[EnvelopeParams]
    tol: float = 1e-12
    period: Optional[float] = None  # in the normalized clock
    extent: Optional[float] = None  # normalized time after which gamma is constant

    def lam(self, t):
        """Clock ``Lambda(t) = int_0^t sigma^2``."""
        if math.isinf(t):
            return math.inf
        return float(self.spec.sigma2.integral(float(t)))

    def lam_inv(self, u):
        if math.isinf(u):
            return math.inf
        s2 = self.spec.sigma2
        if isinstance(s2, Constant):
            return u / s2.value
        if u <= 0:
            return 0.0
        hi = max(u, 1.0)
        while self.lam(hi) < u:
            hi *= 2.0
        return optimize.brentq(lambda t: self.lam(t) - u, 0.0, hi, xtol=self.tol, rtol=4 * np.finfo(float).eps)

    def gamma(self, u):
        u = np.atleast_1d(np.asarray(u, dtype=float))
        return _gamma.gamma_vec(self.table, u, 0)

    def gamma_prime(self, u):
        u = np.atleast_1d(np.asarray(u, dtype=float))
        return _gamma.gamma_vec(self.table, u, 1)

    def int_gamma(self, s, t):
        return _gamma.igamma(self.table, float(s), float(t))

    def int_gamma_sq(self, s, t):
        return _gamma.igamma2(self.table, float(s), float(t))

    @property
    def global_bounds(self) -> LocalBounds:
        tb = self.table
        if tb.kind == KIND_CONST:
            return LocalBounds(0.0, abs(tb.params[0]))
        if tb.kind == KIND_COS:
            a, w, _, b = tb.params
            return LocalBounds(abs(a) * w, abs(a) + abs(b))
        return LocalBounds(tb.dgmax, tb.gmax)

    def require_envelope(self) -> EnvelopeParams:
        if self.envelope is None:
            raise ModelError("drift envelope has not been fitted")
        return self.envelope


# -- Chebyshev tabulation -----------------------------------------------------

_CHEB_DEG = 24


def _fit_panels(func, lo, hi, tol=1e-13, max_depth=18):
    """Adaptive Chebyshev panels for a vectorized ``func`` on ``[lo, hi]``."""
    panels = []
    stack = [(lo, hi, 0)]
    scale = max(1.0, float(np.max(np.abs(func(np.linspace(lo, hi, 65))))))
    while stack:
        a, b, depth = stack.pop()
        x = np.cos(np.pi * (np.arange(_CHEB_DEG + 1) + 0.5) / (_CHEB_DEG + 1))
        vals = func(0.5 * (a + b) + 0.5 * (b - a) * x)
        coef = C.chebfit(x, vals, _CHEB_DEG)
        if np.max(np.abs(coef[-4:])) > tol * scale and depth < max_depth:
            mid = 0.5 * (a + b)
            stack.append((mid, b, depth + 1))
            stack.append((a, mid, depth + 1))
        else:
            panels.append((a, b, coef))
    panels.sort(key=lambda p: p[0])
    return panels


def _table_from_panels(panels, period):
    knots = np.array([p[0] for p in panels] + [panels[-1][1]])
    deg = max(len(p[2]) for p in panels) - 1
    n = len(panels)
    coefs = np.zeros((n, deg + 1))
    dcoefs = np.zeros((n, deg + 1))
    icoefs = np.zeros((n, deg + 2))
    cum = np.zeros(n + 1)
    cum2 = np.zeros(n + 1)
    gl_x, gl_w = np.polynomial.legendre.leggauss(max(deg + 2, 8))
    gmax = 0.0
    dgmax = 0.0
    for i, (a, b, c) in enumerate(panels):
        h = b - a
        coefs[i, : len(c)] = c
        dc = C.chebder(c) * (2.0 / h) if len(c) > 1 else np.zeros(1)
        dcoefs[i, : len(dc)] = dc
        ic = C.chebint(c, lbnd=-1.0) * (h / 2.0)
        icoefs[i, : len(ic)] = ic
        cum[i + 1] = cum[i] + C.chebval(1.0, ic)
        g = C.chebval(gl_x, c)
        cum2[i + 1] = cum2[i] + 0.5 * h * np.dot(gl_w, g * g)
        if len(c) <= 2:
            gmax = max(gmax, abs(C.chebval(-1.0, c)), abs(C.chebval(1.0, c)))
            dgmax = max(dgmax, abs(dc[0]))
        else:
            gmax = max(gmax, float(np.sum(np.abs(c))))
            dgmax = max(dgmax, float(np.sum(np.abs(dc))))
    return _gamma.make_table(KIND_PANEL, (0.0,), knots, coefs, dcoefs, icoefs, cum, cum2,
                             period or 0.0, gmax, dgmax)


def _linear_panels(knots, values):
    panels = []
    for a, b, va, vb in zip(knots[:-1], knots[1:], values[:-1], values[1:]):
        panels.append((float(a), float(b), np.array([0.5 * (va + vb), 0.5 * (vb - va)])))
    return panels


def normalize(spec: CoefficientSpec, tol: float = 1e-12, envelope: Optional[EnvelopeParams] = None,
              gamma_bar: Optional[float] = None, d: Optional[float] = None) -> NormalizedModel:
    """Time-change ``spec`` to unit volatility and fit its drift envelope.

    ``envelope`` (or the ``gamma_bar`` / ``d`` overrides) replace the fitted
    envelope; an override of ``d`` must not be smaller than the fitted value.
    """
    mu, s2 = spec.mu, spec.sigma2
    _check_variance(spec)
    period = spec.period
    extent = None
    if isinstance(s2, Constant):
        s = s2.value
        if isinstance(mu, Constant):
            table = _gamma.make_table(KIND_CONST, (mu.value / s,))
        elif isinstance(mu, CosineAffine):
            table = _gamma.make_table(KIND_COS, (mu.amplitude / s, mu.omega / s, mu.phase, mu.offset / s))
        elif isinstance(mu, PiecewiseLinear):
            knots = mu.knots * s
            values = mu.values / s
            if mu.period is None and knots[0] > 0:
                knots = np.concatenate([[0.0], knots])
                values = np.concatenate([[values[0]], values])
            table = _table_from_panels(_linear_panels(knots, values), None if mu.period is None else mu.period * s)
            extent = None if mu.period is not None else float(knots[-1])
        else:
            table, extent = _tabulate(spec, period)
    else:
        table, extent = _tabulate(spec, period)
    model = NormalizedModel(spec=spec, table=table, envelope=None, tol=tol,
                            period=None if period is None else float(s2.integral(period)), extent=extent)
    if envelope is None:
        try:
            envelope = fit_envelope(model, gamma_bar=gamma_bar)
        except ModelError:
            if d is None or gamma_bar is None:
                envelope = None
            else:
                envelope = EnvelopeParams(d, gamma_bar)
        if envelope is not None and d is not None:
            if d < envelope.d * (1 - 1e-12):
                raise ModelError(f"envelope intercept d={d} is below the fitted value {envelope.d}")
            envelope = EnvelopeParams(float(d), envelope.gamma_bar)
    model.envelope = envelope
    return model


def _check_variance(spec):
    s2 = spec.sigma2
    if isinstance(s2, Constant):
        return
    span = spec.period or max([c.extent or 0.0 for c in (spec.mu, s2)] + [10.0])
    grid = np.linspace(0.0, span, 4001)
    if np.any(np.asarray(s2(grid)) <= 0):
        raise ModelError("sigma2 must be positive on the validation grid")


def _tabulate(spec, period):
    mu, s2 = spec.mu, spec.sigma2
    if period is not None:
        horizon = period
    else:
        exts = [c.extent for c in (mu, s2) if not isinstance(c, Constant)]
        if any(e is None for e in exts):
            raise ModelError("a non-periodic model needs coefficients that are eventually constant (set extent)")
        horizon = max(exts)
    probe = NormalizedModel(spec=spec, table=_gamma.make_table(KIND_CONST), envelope=None)
    u_end = probe.lam(horizon)

    def g(u):
        u = np.atleast_1d(u)
        t = np.array([probe.lam_inv(float(x)) for x in u])
        return np.asarray(mu(t), dtype=float) / np.asarray(s2(t), dtype=float)

    panels = _fit_panels(g, 0.0, u_end)
    return _table_from_panels(panels, u_end if period is not None else None), (None if period else u_end)


# ---------------------------------------------------------------------------
# envelope and local bounds


def _max_rise(u, h):
    """``sup_{s <= t} h(t) - h(s)`` over a sampled curve."""
    running_min = np.minimum.accumulate(h)
    return float(np.max(h - running_min))


def fit_envelope(model: NormalizedModel, gamma_bar: Optional[float] = None, margin: float = 0.01) -> EnvelopeParams:
    """Fit ``(d, gamma_bar)``; closed form for constant and cosine drifts.

    ``gamma_bar`` defaults to minus the long-run mean drift. Grid-based fits of
    ``d`` are inflated by ``margin``.
    """
    tb = model.table
    if tb.kind == KIND_CONST:
        c = float(tb.params[0])
        if c >= 0:
            raise ModelError("drift envelope unsatisfiable: nonnegative mean drift")
        gb = -c if gamma_bar is None else gamma_bar
        _check_gb(gb, -c)
        return EnvelopeParams(0.0, gb)
    if tb.kind == KIND_COS:
        a, w, phi, b = (float(x) for x in tb.params)
        if b >= 0:
            raise ModelError("drift envelope unsatisfiable: nonnegative mean drift")
        gb = -b if gamma_bar is None else gamma_bar
        _check_gb(gb, -b)
        if gb == -b:
            return EnvelopeParams(2.0 * abs(a) / w, gb)
        period = 2.0 * math.pi / w
        u = np.linspace(0.0, 2.0 * period, 200001)
        h = a / w * (np.sin(w * u + phi) - math.sin(phi)) + (b + gb) * u
        return EnvelopeParams(_max_rise(u, h) * (1 + margin), gb)
    # panel tables
    knots = tb.knots
    if tb.period > 0:
        P = tb.period
        mean = -tb.cum[-1] / P
        # a mean within rounding of zero is zero
        scale = float(np.max(np.abs(model.gamma(np.linspace(0.0, P, 257)))))
        if mean <= 1e-10 * max(scale, 1e-300):
            raise ModelError("drift envelope unsatisfiable: nonnegative mean drift")
        gb = mean if gamma_bar is None else gamma_bar
        _check_gb(gb, mean)
        u = _dense_grid(knots, 2)
        u = np.concatenate([u, u[1:] + P])
    else:
        g_end = float(model.gamma(knots[-1] + 1.0)[0])
        if g_end >= 0:
            raise ModelError("drift envelope unsatisfiable: nonnegative mean drift")
        gb = -g_end if gamma_bar is None else gamma_bar
        _check_gb(gb, -g_end)
        u = _dense_grid(knots, 1)
    h = np.array([_gamma.igamma(tb, 0.0, x) for x in u]) + gb * u
    rise = _max_rise(u, h)
    exact_linear = tb.coefs.shape[1] <= 2
    return EnvelopeParams(rise * (1 + (0.0 if exact_linear else margin)), gb)


def _dense_grid(knots, reps):
    pts = [np.linspace(a, b, 401) for a, b in zip(knots[:-1], knots[1:])]
    return np.unique(np.concatenate(pts))


def _check_gb(gb, limit):
    if not (0 < gb <= limit * (1 + 1e-12)):
        raise ModelError(f"gamma_bar must lie in (0, {limit}]")


def local_bounds(model: NormalizedModel, s: float, delta: float) -> LocalBounds:
    """Bounds of ``|gamma'|`` and ``|gamma|`` on ``[s, s + delta]``."""
    if not delta > 0:
        raise ValueError("delta must be positive")
    m, mt = _gamma.bounds(model.table, float(s), float(s + delta))
    return LocalBounds(float(m), float(mt))


# ---------------------------------------------------------------------------
# convenience constructors


def constant_model(mu: float = -1.0, sigma2: float = 1.0) -> CoefficientSpec:
    return CoefficientSpec(Constant(mu), Constant(sigma2))


def cosine_model(amplitude: float = 1.0, frequency: float = 1.0, offset: float = -0.5,
                 sigma2: float = 1.0) -> CoefficientSpec:
    """``mu(t) = amplitude cos(2 pi frequency t) + offset`` with constant variance."""
    return CoefficientSpec(CosineAffine(amplitude, frequency, offset), Constant(sigma2))
