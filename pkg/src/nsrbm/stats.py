"""Summary statistics, the two-sample KS test and convergence-slope fits."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence, Tuple

import numpy as np
from scipy import special

Z90 = 1.6448536269514722


@dataclass(frozen=True)
class SampleSummary:
    n: int
    mean: float
    se: float
    ci90: Tuple[float, float]
    bias: Optional[float] = None
    rmse: Optional[float] = None

    def as_dict(self) -> dict:
        return {"n": self.n, "mean": self.mean, "se": self.se, "ci90": list(self.ci90),
                "bias": self.bias, "rmse": self.rmse}


def summarize(sample, reference: Optional[float] = None) -> SampleSummary:
    """Mean, standard error, 90% normal interval and, given a reference, bias and RMSE."""
    x = np.asarray(sample, dtype=np.float64)
    n = x.size
    if n < 2:
        raise ValueError("need at least two observations")
    x = np.sort(x)  # order-independent rounding
    mean = float(math.fsum(x) / n)
    se = float(np.sqrt(math.fsum((x - mean) ** 2) / (n - 1) / n))
    ci = (mean - Z90 * se, mean + Z90 * se)
    if reference is None:
        return SampleSummary(n, mean, se, ci)
    bias = mean - float(reference)
    return SampleSummary(n, mean, se, ci, bias, math.sqrt(se * se + bias * bias))


@dataclass(frozen=True)
class KSResult:
    statistic: float
    pvalue: float


def ks_two_sample(a, b) -> KSResult:
    """Two-sample Kolmogorov-Smirnov statistic with its asymptotic p-value."""
    a = np.sort(np.asarray(a, dtype=np.float64))
    b = np.sort(np.asarray(b, dtype=np.float64))
    na, nb = a.size, b.size
    if na == 0 or nb == 0:
        raise ValueError("both samples must be nonempty")
    pooled = np.concatenate([a, b])
    fa = np.searchsorted(a, pooled, side="right") / na
    fb = np.searchsorted(b, pooled, side="right") / nb
    d = float(np.max(np.abs(fa - fb)))
    en = math.sqrt(na * nb / (na + nb))
    p = float(special.kolmogorov(en * d)) if d > 0 else 1.0
    return KSResult(d, min(max(p, 0.0), 1.0))


@dataclass(frozen=True)
class SlopeFit:
    slope: float
    stderr: float
    intercept: float


def loglog_slope(points: Sequence[Tuple[float, float]]) -> SlopeFit:
    """Least-squares slope of ``log rmse`` against ``log budget``."""
    pts = np.asarray(points, dtype=np.float64)
    if pts.ndim != 2 or pts.shape[0] < 3 or pts.shape[1] != 2:
        raise ValueError("need at least three (budget, rmse) pairs")
    if np.any(pts <= 0) or not np.all(np.isfinite(pts)):
        raise ValueError("budgets and errors must be positive")
    lx, ly = np.log(pts[:, 0]), np.log(pts[:, 1])
    xc = lx - lx.mean()
    sxx = float(xc @ xc)
    slope = float(xc @ (ly - ly.mean()) / sxx)
    intercept = float(ly.mean() - slope * lx.mean())
    resid = ly - intercept - slope * lx
    n = len(lx)
    stderr = math.sqrt(float(resid @ resid) / (n - 2) / sxx) if n > 2 else math.nan
    return SlopeFit(slope, stderr, intercept)
