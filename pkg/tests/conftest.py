import math

import numpy as np
import pytest

import nsrbm as N


@pytest.fixture(scope="session")
def cosine():
    return N.normalize(N.cosine_model())


@pytest.fixture(scope="session")
def drift_minus_one():
    return N.normalize(N.constant_model(-1.0, 1.0))


@pytest.fixture(scope="session")
def zero_drift():
    return N.normalize(N.constant_model(0.0, 1.0))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def within_se(sample, target, k):
    x = np.asarray(sample, dtype=float)
    se = x.std(ddof=1) / math.sqrt(x.size)
    return abs(x.mean() - target) <= k * se, x.mean(), se
