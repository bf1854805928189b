import math

import numpy as np
import pytest
from scipy import stats

import nsrbm as N
import nsrbm.distributions as D
from nsrbm import baseline as B
from oracles import drifted_max_cdf


def test_constant_drift_is_exact():
    # cell averaging changes nothing for a constant drift, so any step gives the true law
    m = N.normalize(N.constant_model(-1.0))
    out = B.discretize_max(m, 2.0, 0.5, D.RandomStream(1), 40_000)
    assert stats.kstest(out[:, 0], lambda q: drifted_max_cdf(q, -1.0, 2.0)).pvalue > 0.01
    assert stats.kstest(out[:, 1], stats.norm(-2.0, math.sqrt(2.0)).cdf).pvalue > 0.01


def test_naive_grid_max_is_biased_low():
    m = N.normalize(N.constant_model(-1.0))
    out = B.discretize_max(m, 2.0, 0.25, D.RandomStream(2), 40_000, naive=True)
    exact = B.discretize_max(m, 2.0, 0.25, D.RandomStream(3), 40_000)
    assert out[:, 0].mean() < exact[:, 0].mean() - 0.05
    assert stats.kstest(out[:, 0], lambda q: drifted_max_cdf(q, -1.0, 2.0)).pvalue < 1e-6


def test_cell_max_dominates_endpoints(cosine):
    out = B.discretize_max(cosine, 3.0, 0.1, D.RandomStream(4), 5000)
    assert np.all(out[:, 0] >= np.maximum(out[:, 1], 0.0))


def test_partial_last_cell(cosine):
    out = B.discretize_max(cosine, 1.05, 0.5, D.RandomStream(5), 10)
    assert out.shape == (10, 2)


def test_validation(cosine):
    with pytest.raises(ValueError):
        B.discretize_max(cosine, 1.0, 0.0)
    with pytest.raises(ValueError):
        B.discretize_batch(cosine, 1.0, 0.1, 0, 1)
    with pytest.raises(ValueError):
        B.allocate_budget(0.0)


def test_batch_blocks_are_worker_invariant(cosine):
    a = B.discretize_batch(cosine, 2.0, 0.05, 900, 7, workers=1, block_size=100)
    b = B.discretize_batch(cosine, 2.0, 0.05, 900, 7, workers=3, block_size=100)
    assert np.array_equal(a, b)


def test_step_pairing_example():
    assert B.experiment_delta(200_000) == pytest.approx(9.46e-4, rel=1e-3)
    assert B.experiment_delta(10_000) == pytest.approx(2.0e-3, rel=1e-12)


def test_budget_doubling():
    p, q = B.allocate_budget(1e9), B.allocate_budget(2e9)
    assert q.N / p.N == pytest.approx(2 ** 0.8, rel=1e-3)
    assert p.delta / q.delta == pytest.approx(2 ** 0.2, rel=1e-4)
    assert 2 ** 0.8 == pytest.approx(1.741, abs=1e-3) and 2 ** 0.2 == pytest.approx(1.149, abs=1e-3)


def test_budget_spent():
    p = B.allocate_budget(5e8, T=35.0)
    assert 35.0 * (p.N + 1) / p.delta == pytest.approx(5e8, rel=1e-3)
    assert B.allocate_budget(1.0).N == 1


@pytest.mark.slow
def test_bias_shrinks_with_step(cosine):
    n = 2_000_000
    ref = B.discretize_max(cosine, 2.0, 2.0**-7, D.RandomStream(10), n)[:, 0].mean()
    coarse = B.discretize_max(cosine, 2.0, 0.5, D.RandomStream(11), n)[:, 0].mean() - ref
    fine = B.discretize_max(cosine, 2.0, 0.25, D.RandomStream(12), n)[:, 0].mean() - ref
    assert abs(coarse) >= 3 * abs(fine), (coarse, fine)
