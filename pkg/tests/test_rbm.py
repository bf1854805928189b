import math

import numpy as np
import pytest
from scipy import stats

import nsrbm as N
import nsrbm.distributions as D
from nsrbm import rbm as R
from oracles import first_passage_grid, ig_cdf, rbm_transient_cdf


def test_alpha_never_probability():
    g = D.RandomStream(1).generator
    draws = np.array([R.sample_alpha(1.0, 0.5, g) for _ in range(40_000)])
    p = np.mean(np.isinf(draws))
    q = 1 - math.exp(-1.0)
    assert q == pytest.approx(0.63212, abs=1e-5)
    assert abs(p - q) <= 4 * math.sqrt(q * (1 - q) / draws.size)


def test_alpha_small_gap():
    g = D.RandomStream(2).generator
    draws = np.array([R.sample_alpha(1e-6, 0.5, g) for _ in range(2000)])
    assert np.all(np.isfinite(draws)) or np.mean(np.isinf(draws)) < 0.01
    assert np.median(draws) < 1e-8


def test_alpha_validation():
    with pytest.raises(ValueError):
        R.sample_alpha(0.0, 0.5, 1)
    with pytest.raises(ValueError):
        R.sample_alpha(1.0, 0.0, 1)


@pytest.mark.slow
def test_alpha_finite_law_against_grid():
    g = D.RandomStream(3).generator
    draws = np.array([R.sample_alpha(1.0, 0.5, g) for _ in range(150_000)])
    finite = draws[np.isfinite(draws)][:50_000]
    assert stats.kstest(finite, lambda t: ig_cdf(t, 2.0, 1.0)).pvalue > 0.01
    grid = first_passage_grid(1.0, 0.5, 12_000, 40.0, 2e-3, np.random.default_rng(4))
    assert stats.ks_2samp(finite, grid).pvalue > 0.01


def test_config_validation():
    with pytest.raises(ValueError):
        R.Alg2Config(c=1.0)
    with pytest.raises(ValueError):
        R.Alg2Config(epsilon=0.0)
    with pytest.raises(ValueError):
        R.Alg2Config(beta_rule="other")


def test_unfitted_envelope_rejected():
    m = N.normalize(N.cosine_model(offset=0.2))
    with pytest.raises(N.ModelError):
        R.sample_triplet_alg2(m, math.inf, rng=1)


def test_triplet_invariants(cosine):
    b = R.sample_triplets(cosine, 6.5, 2000, 5, "alg2")
    assert np.all(b.M >= 0) and np.all(b.M >= b.Y_end)
    assert np.all((b.v >= 0) & (b.v <= 6.5))
    b = R.sample_triplets(cosine, 6.5, 2000, 5, "alg1")
    assert np.all(b.M >= b.Y_end) and np.all(b.v <= 6.5)


def test_single_triplet_api(cosine):
    t = R.sample_triplet_alg2(cosine, 3.0, rng=1)
    assert t.Y_end is not None and t.M >= max(0.0, t.Y_end)
    t = R.sample_triplet_alg1(cosine, math.inf, rng=1)
    assert t.Y_end is None and t.iterations == 1
    t = R.sample_triplet_alg1(N.normalize(N.constant_model(-1.0)), math.inf, rng=1)
    assert t.synthetic_intercept


@pytest.mark.parametrize("rule", ["standard", "improved"])
def test_stationary_constant_drift(drift_minus_one, rule):
    b = R.sample_triplets(drift_minus_one, math.inf, 20_000, 6, "alg2", R.Alg2Config(beta_rule=rule))
    assert stats.kstest(b.M, "expon", args=(0, 0.5)).pvalue > 0.01


def test_iteration_bound(cosine):
    cfg = R.Alg2Config()
    b = R.sample_triplets(cosine, math.inf, 5000, 7, "alg2", cfg)
    bound = 1 / -math.expm1(-2 * (cfg.c - 1) * cosine.envelope.d * cosine.envelope.gamma_bar)
    se = b.iterations.std(ddof=1) / math.sqrt(b.iterations.size)
    assert b.iterations.mean() <= bound + 3 * se


@pytest.mark.parametrize("alg", ["alg1", "alg2"])
@pytest.mark.parametrize("x0,t", [(1.0, 1.0), (0.0, 3.0)])
def test_transient_constant_rbm(drift_minus_one, alg, x0, t):
    b = R.sample_triplets(drift_minus_one, t, 20_000, 8, alg)
    age, x = R.rbm_states(x0, b, t)
    assert np.all(x >= 0)
    assert stats.kstest(x, lambda y: rbm_transient_cdf(y, x0, -1.0, t)).pvalue > 0.01
    if x0 == 0:
        assert np.all(np.isfinite(age))


def test_large_start_never_idles(drift_minus_one):
    b = R.sample_triplets(drift_minus_one, 0.1, 2000, 9, "alg2")
    age, x = R.rbm_states(10.0, b, 0.1)
    assert np.mean(np.isinf(age)) > 0.999


def test_state_from_triplet():
    tr = R.TripletSample(v=0.4, M=1.2, Y_end=0.5, iterations=1, skeleton_points=3, rejections=0)
    assert R.rbm_state_from_triplet(0.0, tr, 2.0) == R.RbmState(0.4, 1.2)
    assert R.rbm_state_from_triplet(1.0, tr, 2.0) == R.RbmState(math.inf, 1.5)
    assert R.rbm_state_from_triplet(5.0, tr, math.inf) == R.RbmState(0.4, 1.2)
    with pytest.raises(ValueError):
        R.rbm_state_from_triplet(0.0, R.TripletSample(0.1, 1.0, None, 1, 0, 0), 2.0)


def test_alg1_argmax_below_horizon_tail(cosine):
    b = R.sample_triplets(cosine, math.inf, 20_000, 10, "alg1")
    for u in (1.0, 2.0, 5.0):
        p = np.mean(b.v >= u)
        assert p <= R.warmup_bound(u, cosine.envelope) + 3 * math.sqrt(p * (1 - p) / b.v.size + 1e-12)


def test_alg2_path_length_within_last_passage(cosine):
    # 99th percentile of the argmax stays below that of the last-passage horizon 1/H
    b = R.sample_triplets(cosine, math.inf, 20_000, 11, "alg2")
    env = cosine.envelope
    L = 1.0 / D.sample_inverse_gaussian(env.gamma_bar / env.d, env.gamma_bar**2, D.RandomStream(12), 20_000)
    assert np.quantile(b.v, 0.99) <= np.quantile(L, 0.99)


@pytest.mark.slow
def test_algorithms_agree_piecewise():
    spec = N.CoefficientSpec(N.PiecewiseLinear([0.0, 0.4, 1.0], [0.8, -1.6, 0.8], period=1.0))
    m = N.normalize(spec)
    a = R.sample_triplets(m, math.inf, 20_000, 13, "alg1").M
    b = R.sample_triplets(m, math.inf, 20_000, 14, "alg2").M
    assert stats.ks_2samp(a, b).pvalue > 0.01


def test_nonconstant_variance_clock():
    # sigma2 = 2 doubles the clock: M(inf) for mu = -1 is Exp(2 |mu| / sigma2) = Exp(1)
    m = N.normalize(N.constant_model(-1.0, 2.0))
    b = R.sample_triplets(m, math.inf, 20_000, 15, "alg2")
    assert stats.kstest(b.M, "expon", args=(0, 1.0)).pvalue > 0.01


def test_worker_invariance(cosine):
    a = R.sample_triplets(cosine, 4.0, 1200, 16, "alg2", workers=1, block_size=100)
    b = R.sample_triplets(cosine, 4.0, 1200, 16, "alg2", workers=4, block_size=100)
    assert np.array_equal(a.M, b.M) and np.array_equal(a.v, b.v) and np.array_equal(a.Y_end, b.Y_end)


def test_warmup_bound_examples():
    env = N.EnvelopeParams(1 / math.pi, 0.5)
    assert R.warmup_bound(1e-12, env) == pytest.approx(1.0)
    assert R.warmup_bound(math.inf, env) == 0.0
    assert R.warmup_bound(5.0, env) == pytest.approx(ig_cdf(0.2, 0.5 * math.pi, 0.25), abs=1e-12)
    vals = [R.warmup_bound(u, env) for u in (0.1, 0.5, 1, 2, 5, 20)]
    assert all(a >= b for a, b in zip(vals, vals[1:]))


def test_invert_warmup_bound():
    env = N.EnvelopeParams(1 / math.pi, 0.5)
    u = R.invert_warmup_bound(0.1, env)
    assert R.warmup_bound(u, env) == pytest.approx(0.1, abs=1e-9)


def test_plan_zero_start(cosine):
    plan = R.plan_warmup(cosine, 0.1, 40.0, 0.0, 3000, 17)
    assert plan.n_infinite == 0
    assert plan.quantile <= plan.recommended <= plan.bound
    assert "safety factor" in plan.note


def test_plan_without_finite_answer(drift_minus_one):
    plan = R.plan_warmup(drift_minus_one, 0.1, 0.1, 10.0, 500, 18)
    assert plan.recommended is None and "no finite recommendation" in plan.note


def test_plan_seed_stability(drift_minus_one):
    a = R.plan_warmup(drift_minus_one, 0.1, 30.0, 0.0, 4000, 19)
    b = R.plan_warmup(drift_minus_one, 0.1, 30.0, 0.0, 4000, 20)
    assert abs(a.recommended - b.recommended) <= 2 * math.hypot(a.se, b.se)
