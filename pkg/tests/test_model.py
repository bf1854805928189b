import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

import nsrbm as N
from nsrbm.model import Constant, CosineAffine, PiecewiseLinear, UserFunction


def test_constant_reversal_is_identity():
    spec = N.constant_model(-1.0, 1.0)
    rev = N.reverse_spec(spec, 3.7)
    assert rev.mu(np.array([0.0, 1.0, 5.0])).tolist() == [-1.0, -1.0, -1.0]


def test_cosine_reversal_at_integer_horizon():
    spec = N.cosine_model()
    rev = N.reverse_spec(spec, 4.0)
    u = np.linspace(0, 3, 31)
    assert np.allclose(rev.mu(u), spec.mu(u), atol=1e-12)


def test_linear_drift_reversal():
    spec = N.CoefficientSpec(PiecewiseLinear([0.0, 1.0], [0.0, 1.0]))
    rev = N.reverse_spec(spec, 1.0)
    assert rev.mu(0.25) == pytest.approx(0.75)
    assert rev.mu_prime(0.25) == pytest.approx(-1.0)


def test_infinite_reversal_requires_period():
    spec = N.CoefficientSpec(PiecewiseLinear([0.0, 1.0], [0.0, -1.0]))
    with pytest.raises(N.ModelError, match="periodicity"):
        N.reverse_spec(spec, math.inf)


def test_unit_variance_is_identity_clock(cosine):
    for t in (0.0, 0.3, 7.25):
        assert cosine.lam(t) == pytest.approx(t)
        assert cosine.lam_inv(t) == pytest.approx(t)


def test_affine_variance_clock():
    spec = N.CoefficientSpec(Constant(-1.0), PiecewiseLinear([0.0, 10.0], [1.0, 11.0]))
    m = N.normalize(spec)
    assert m.lam(1.0) == pytest.approx(1.5)
    assert m.lam(2.0) == pytest.approx(4.0)
    assert m.lam_inv(1.5) == pytest.approx(1.0, abs=1e-10)
    # gamma(u) = mu / sigma2 at the original time lam_inv(u)
    assert m.gamma(1.5)[0] == pytest.approx(-0.5, rel=1e-8)


def test_cosine_normalized_drift(cosine):
    u = np.linspace(0, 2, 17)
    assert np.allclose(cosine.gamma(u), np.cos(2 * np.pi * u) - 0.5, atol=1e-12)
    assert np.allclose(cosine.gamma_prime(u), -2 * np.pi * np.sin(2 * np.pi * u), atol=1e-10)


def test_nonpositive_variance_rejected():
    spec = N.CoefficientSpec(Constant(-1.0), PiecewiseLinear([0.0, 1.0], [1.0, -1.0]))
    with pytest.raises(N.ModelError):
        N.normalize(spec)


def test_constant_envelope():
    env = N.normalize(N.constant_model(-0.5, 1.0)).envelope
    assert (env.d, env.gamma_bar) == (0.0, 0.5)


def test_cosine_envelope(cosine):
    assert cosine.envelope.gamma_bar == pytest.approx(0.5)
    assert cosine.envelope.d == pytest.approx(1.0 / math.pi, rel=1e-12)


def test_nonnegative_mean_drift_has_no_envelope():
    m = N.normalize(N.cosine_model(offset=0.1))
    assert m.envelope is None
    with pytest.raises(N.ModelError, match="nonnegative mean drift"):
        N.fit_envelope(m)


def test_intercept_override_cannot_shrink():
    with pytest.raises(N.ModelError):
        N.normalize(N.cosine_model(), d=0.2)
    assert N.normalize(N.cosine_model(), d=0.5).envelope.d == 0.5


def test_local_bounds_examples(cosine):
    b = N.local_bounds(N.normalize(N.constant_model(-0.5)), 3.0, 1.0)
    assert (b.m, b.m_tilde) == (0.0, 0.5)
    b = N.local_bounds(cosine, 0.0, 1.0)
    assert b.m == pytest.approx(2 * math.pi)
    b = N.local_bounds(cosine, 0.0, 0.25)
    assert b.m_tilde == pytest.approx(0.5)
    with pytest.raises(ValueError):
        N.local_bounds(cosine, 0.0, 0.0)


def _user_model():
    f = lambda t: 0.6 * math.sin(2 * math.pi * t) - 0.4 + 0.2 * math.cos(6 * math.pi * t)
    df = lambda t: 1.2 * math.pi * math.cos(2 * math.pi * t) - 1.2 * math.pi * math.sin(6 * math.pi * t)
    s2 = lambda t: 1.0 + 0.5 * math.cos(2 * math.pi * t)
    ds2 = lambda t: -math.pi * math.sin(2 * math.pi * t)
    return N.normalize(N.CoefficientSpec(UserFunction(f, df, period=1.0), UserFunction(s2, ds2, period=1.0)))


@pytest.fixture(scope="module")
def user_model():
    return _user_model()


def test_user_model_clock(user_model):
    # Lambda(t) = t + sin(2 pi t) / (4 pi)
    for t in (0.1, 0.6, 2.3):
        assert user_model.lam(t) == pytest.approx(t + math.sin(2 * math.pi * t) / (4 * math.pi), abs=1e-10)


@settings(max_examples=60, deadline=None)
@given(st.floats(0.0, 20.0), st.floats(1e-6, 5.0))
def test_clock_monotone_and_invertible(t, dt):
    m = _MODELS["user"]
    assert m.lam(t + dt) > m.lam(t)
    u = m.lam(t)
    assert abs(m.lam(m.lam_inv(u)) - u) <= 1e-10


@settings(max_examples=60, deadline=None)
@given(st.sampled_from(["cosine", "user", "pwl"]), st.floats(0.0, 10.0), st.floats(0.0, 10.0))
def test_envelope_sound(name, s, length):
    m = _MODELS[name]
    env = m.envelope
    assert m.int_gamma(s, s + length) <= env.d - length * env.gamma_bar + 1e-9


def test_envelope_sound_bulk():
    r = np.random.default_rng(5)
    for m in _MODELS.values():
        env = m.envelope
        s = r.uniform(0, 10, 10_000)
        h = r.exponential(2.0, 10_000)
        worst = max(m.int_gamma(a, a + b) + b * env.gamma_bar - env.d for a, b in zip(s, h))
        assert worst <= 1e-9


@settings(max_examples=40, deadline=None)
@given(st.sampled_from(["cosine", "user", "pwl"]), st.floats(0.0, 10.0), st.floats(0.01, 2.0))
def test_local_bounds_dominate(name, s, delta):
    m = _MODELS[name]
    b = N.local_bounds(m, s, delta)
    u = np.linspace(s, s + delta, 1001)
    assert np.all(np.abs(m.gamma(u)) <= b.m_tilde * (1 + 1e-9) + 1e-12)
    # the derivative at a kink on the right edge belongs to the next piece
    assert np.all(np.abs(m.gamma_prime(u[:-1])) <= b.m * (1 + 1e-9) + 1e-12)


_MODELS = {
    "cosine": N.normalize(N.cosine_model()),
    "user": _user_model(),
    "pwl": N.normalize(N.CoefficientSpec(PiecewiseLinear([0.0, 0.3, 1.0], [0.5, -1.5, 0.5], period=1.0))),
}
