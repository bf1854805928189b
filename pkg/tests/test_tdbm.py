import math

import numpy as np
import pytest
from scipy import stats

import nsrbm as N
import nsrbm.distributions as D
from nsrbm import baseline as B
from nsrbm import tdbm as T
from oracles import drifted_max_cdf


def test_choose_delta_no_curvature():
    # theta^2 / (2 log 2 + theta m~) with theta = 4, m~ = 0.5
    assert T.choose_delta(4.0, N.LocalBounds(0.0, 0.5)) == pytest.approx(16.0 / (2 * math.log(2) + 2.0))


def test_choose_delta_cosine():
    b = N.LocalBounds(2 * math.pi, 1.5)
    d = T.choose_delta(0.5, b)
    assert d <= 1.0 / (2 * math.pi * 0.5) + 1e-15
    # the feasibility condition holds at the chosen value
    assert 0.25 / d - 0.5 * (1.5 + d * math.pi) >= 2 * math.log(2) - 1e-12


def test_choose_delta_validation():
    with pytest.raises(ValueError):
        T.choose_delta(0.0, N.LocalBounds(1.0, 1.0))


def test_params_constant_drift_location_free(drift_minus_one):
    p = T.SegmentParams.for_model(drift_minus_one)
    assert p.delta == T.choose_delta(p.theta, N.local_bounds(drift_minus_one, 17.0, 3.0))


def test_likelihood_exponent_trivial_cases(zero_drift, drift_minus_one):
    g = D.RandomStream(1).generator
    seg = T.propose_segment(zero_drift, 0.0, 0.5, 0.3, g)
    assert T.likelihood_exponent(seg, zero_drift, 0.0) == 0.0
    seg = T.propose_segment(drift_minus_one, 0.0, 0.5, 0.3, g)
    expect = -seg.w_end - 0.5 * seg.tau
    assert T.likelihood_exponent(seg, drift_minus_one, 0.0) == pytest.approx(expect, abs=1e-12)


def test_likelihood_exponent_quadrature(cosine):
    # dense path: compare the trapezoid exponent with a Simpson evaluation of the same pieces
    g = np.random.default_rng(3)
    tau = 0.2
    t = np.linspace(0, tau, 4001)
    w = np.concatenate([[0.0], np.cumsum(g.standard_normal(4000) * math.sqrt(tau / 4000))])
    seg = T.SegmentProposal(tau, t[1:-1], w[1:-1], float(w[-1]), 1.0, N.local_bounds(cosine, 0.1, tau), 1.0)
    s = 0.1
    from scipy import integrate
    path = integrate.simpson(cosine.gamma_prime(s + t) * w, x=t)
    sq = integrate.quad(lambda u: (math.cos(2 * math.pi * u) - 0.5) ** 2, s, s + tau)[0]
    ref = (math.cos(2 * math.pi * (s + tau)) - 0.5) * w[-1] - 0.5 * sq - path
    assert T.likelihood_exponent(seg, cosine, s) == pytest.approx(ref, abs=1e-4)


def test_accept_always_without_drift(zero_drift):
    g = D.RandomStream(2).generator
    for _ in range(200):
        seg = T.propose_segment(zero_drift, 0.0, 0.5, 0.4, g)
        assert T.accept_segment(seg, zero_drift, 0.0, g)


def test_constant_drift_has_no_thinning_events(drift_minus_one):
    g = D.RandomStream(3).generator
    for _ in range(100):
        assert T.propose_segment(drift_minus_one, 0.0, 0.5, 0.4, g).kappas.size == 0


def test_acceptance_rate_lower_bound(cosine):
    a = 0.5
    b0 = cosine.global_bounds
    delta = 1.0 / (b0.m * a)
    g = D.RandomStream(4).generator
    n, acc = 4000, 0
    for i in range(n):
        s = g.random()
        seg = T.propose_segment(cosine, s, a, delta, g)
        acc += T.accept_segment(seg, cosine, s, g)
    bound = math.exp(-b0.m * a * delta - b0.m_tilde * a)
    assert acc / n >= bound


def test_sample_tdbm_validates_barriers(cosine):
    with pytest.raises(ValueError):
        T.sample_tdbm(cosine, (0.0, 0.0), 1.0, (0.5, 1.0))
    with pytest.raises(ValueError, match="terminate"):
        T.sample_tdbm(cosine, (0.0, 0.0), math.inf, (-math.inf, math.inf))


def test_lower_barrier_stop_lands_on_barrier(cosine):
    g = D.RandomStream(5).generator
    seen = 0
    for _ in range(50):
        r = T.sample_tdbm(cosine, (0.0, 0.0), math.inf, (-1.0, math.inf), rng=g)
        assert r.stop_reason == "lower"
        assert r.end_value == -1.0
        seen += 1
        assert r.max >= r.skeleton_z.max() - 1e-12
        assert 0.0 <= r.t_max <= r.end_time
    assert seen == 50


def test_upper_barrier_stop(cosine):
    g = D.RandomStream(6).generator
    r = T.sample_tdbm(cosine, (0.0, 0.0), 50.0, (-5.0, 0.3), rng=g)
    if r.stop_reason == "upper":
        assert r.end_value == 0.3 and r.max == 0.3


def test_barrier_hitting_probability():
    # drift -0.5 from 0 with barrier at -y: P(reach +x first) from the scale function
    m = N.normalize(N.constant_model(-0.5))
    y, x = 1.0, 0.5
    g = D.RandomStream(7).generator
    n = 6000
    up = sum(T.sample_tdbm(m, (0.0, 0.0), math.inf, (-y, x), rng=g, record_skeleton=False).stop_reason == "upper"
             for _ in range(n))
    p = (1 - math.exp(-2 * 0.5 * y)) / (math.exp(2 * 0.5 * x) - math.exp(-2 * 0.5 * y))
    assert abs(up / n - p) <= 4 * math.sqrt(p * (1 - p) / n)


@pytest.mark.parametrize("mu", [-1.0, 0.0, 0.7])
def test_constant_drift_max_law(mu):
    m = N.normalize(N.constant_model(mu))
    out = T.sample_tdbm_batch(m, 1.0, 30_000, D.RandomStream(8, (int(10 * mu) + 10,)))
    assert stats.kstest(out[:, 0], lambda q: drifted_max_cdf(q, mu, 1.0)).pvalue > 0.01
    assert stats.kstest(out[:, 2], stats.norm(mu, 1.0).cdf).pvalue > 0.01


def test_zero_drift_argmax_is_arcsine(zero_drift):
    out = T.sample_tdbm_batch(zero_drift, 1.0, 30_000, D.RandomStream(9))
    assert stats.kstest(out[:, 1], stats.arcsine.cdf).pvalue > 0.01


@pytest.mark.slow
def test_triplet_matches_fine_grid(cosine):
    out = T.sample_tdbm_batch(cosine, 1.0, 20_000, D.RandomStream(10))
    grid = B.discretize_max(cosine, 1.0, 2.0**-14, D.RandomStream(11), 20_000)
    assert stats.ks_2samp(out[:, 0], grid[:, 0]).pvalue > 0.01
    assert stats.ks_2samp(out[:, 2], grid[:, 1]).pvalue > 0.01


def test_segment_count_bound(cosine):
    env = cosine.envelope
    p = T.SegmentParams.for_model(cosine)
    g = D.RandomStream(12).generator
    y = 1.0
    counts = [T.sample_tdbm(cosine, (0.0, 0.0), math.inf, (-y, math.inf), p, g, False).stats[D.ST_SEGMENTS]
              for _ in range(2000)]
    assert np.mean(counts) <= 4 * (y + p.theta + env.d) / (p.delta * env.gamma_bar)


def test_segments_persist(cosine):
    # P(tau_n >= Delta/2) >= 1/2 for the localization exit time
    p = T.SegmentParams.for_model(cosine)
    tau, _ = D.sample_exit_time(p.theta, D.RandomStream(13), size=20_000)
    assert np.mean(np.minimum(tau, p.delta) >= p.delta / 2) >= 0.5


def test_skeleton_respects_record(cosine):
    g = D.RandomStream(14).generator
    for _ in range(30):
        r = T.sample_tdbm(cosine, (0.0, 0.0), 3.0, rng=g)
        assert r.stop_reason == "horizon" and r.end_time == pytest.approx(3.0)
        assert r.max >= r.skeleton_z.max()
        assert np.all(np.diff(r.skeleton_t) >= 0)
