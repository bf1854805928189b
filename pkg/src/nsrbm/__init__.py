"""Exact simulation of reflected Brownian motion with time-varying coefficients."""

from .model import (
    CoefficientSpec,
    Constant,
    CosineAffine,
    EnvelopeParams,
    LocalBounds,
    ModelError,
    NormalizedModel,
    PiecewiseLinear,
    UserFunction,
    constant_model,
    cosine_model,
    fit_envelope,
    local_bounds,
    normalize,
    reverse_spec,
)

from .rbm import (Alg2Config, RbmState, TripletSample, plan_warmup, rbm_state_from_triplet, sample_alpha,
                  sample_triplet_alg1, sample_triplet_alg2, sample_triplets, warmup_bound)

__version__ = "0.1.0"
