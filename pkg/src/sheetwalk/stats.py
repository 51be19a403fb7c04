"""Goodness-of-fit tests, covariance estimates and log-log rate fits.

Every function is a pure function of its inputs.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import kolmogorov, ndtr

LEVEL = 0.01
MIN_KS_SAMPLES = 100


@dataclass(frozen=True)
class SampleSummary:
    count: int
    mean: float
    variance: float
    min: float
    max: float

    @property
    def stderr(self):
        return math.sqrt(self.variance / self.count)


def summarize(samples) -> SampleSummary:
    x = np.asarray(samples, dtype=float).ravel()
    if x.size < 2:
        raise ValueError("need at least two samples")
    return SampleSummary(int(x.size), float(x.mean()), float(x.var(ddof=1)), float(x.min()), float(x.max()))


@dataclass(frozen=True)
class KSResult:
    statistic: float
    p_value: float
    n: int

    def passes(self, level: float = LEVEL) -> bool:
        return self.p_value >= level


def normal_cdf(mean: float = 0.0, variance: float = 1.0):
    if not variance > 0:
        raise ValueError(f"variance must be positive, got {variance!r}")
    sd = math.sqrt(variance)
    return lambda x: ndtr((np.asarray(x, dtype=float) - mean) / sd)


def exp_cdf(rate: float):
    if not rate > 0:
        raise ValueError(f"rate must be positive, got {rate!r}")

    def cdf(x):
        x = np.asarray(x, dtype=float)
        return np.where(x > 0, -np.expm1(-rate * np.maximum(x, 0.0)), 0.0)

    return cdf


def symmetric_exp_cdf(rate: float):
    """CDF of K * E with K a fair sign and E ~ Exp(rate) (a Laplace law)."""
    if not rate > 0:
        raise ValueError(f"rate must be positive, got {rate!r}")

    def cdf(x):
        x = np.asarray(x, dtype=float)
        half = 0.5 * np.exp(-rate * np.abs(x))
        return np.where(x < 0, half, 1.0 - half)

    return cdf


def _check_ks_size(n):
    if n < MIN_KS_SAMPLES:
        raise ValueError(f"asymptotic KS p-values need >= {MIN_KS_SAMPLES} samples, got {n}")


def ks_test(samples, reference_cdf) -> KSResult:
    """One-sample Kolmogorov-Smirnov test with the asymptotic p-value."""
    x = np.sort(np.asarray(samples, dtype=float).ravel())
    n = x.size
    _check_ks_size(n)
    f = np.asarray(reference_cdf(x), dtype=float)
    if np.any(np.diff(f) < 0) or np.any(f < 0) or np.any(f > 1):
        raise ValueError("reference CDF is not monotone into [0, 1] on the sample")
    upper = np.arange(1, n + 1) / n - f
    lower = f - np.arange(n) / n
    d = float(max(upper.max(), lower.max()))
    return KSResult(d, float(kolmogorov(math.sqrt(n) * d)), n)


def ks_2samp(a, b) -> KSResult:
    """Two-sample KS test; ``n`` reports the effective size n1 n2 / (n1 + n2)."""
    a = np.sort(np.asarray(a, dtype=float).ravel())
    b = np.sort(np.asarray(b, dtype=float).ravel())
    _check_ks_size(min(a.size, b.size))
    pooled = np.concatenate((a, b))
    fa = np.searchsorted(a, pooled, side="right") / a.size
    fb = np.searchsorted(b, pooled, side="right") / b.size
    d = float(np.max(np.abs(fa - fb)))
    en = a.size * b.size / (a.size + b.size)
    return KSResult(d, float(kolmogorov(math.sqrt(en) * d)), int(en))


def empirical_covariance(x, y):
    """Unbiased sample covariance and its standard error.

    The error is the standard deviation of the centred products over
    ``sqrt(count)``.
    """
    x = np.asarray(x, dtype=float).ravel()
    y = np.asarray(y, dtype=float).ravel()
    if x.size != y.size:
        raise ValueError(f"length mismatch: {x.size} vs {y.size}")
    if x.size < 30:
        raise ValueError("need at least 30 pairs")
    prod = (x - x.mean()) * (y - y.mean())
    est = float(prod.sum() / (x.size - 1))
    se = float(prod.std(ddof=1) / math.sqrt(x.size))
    return est, se


def variance_with_se(x):
    """Sample variance and its large-sample standard error sqrt((m4 - s**4) / N)."""
    x = np.asarray(x, dtype=float).ravel()
    c = x - x.mean()
    var = float(c.var(ddof=1))
    m4 = float(np.mean(c**4))
    return var, math.sqrt(max(m4 - var * var, 0.0) / x.size)


def within_band(estimate, target, se, k=3.0) -> bool:
    return abs(estimate - target) <= k * se


def loglog_slope(xs, ys):
    """Least-squares fit of log y on log x: (slope, intercept, r squared)."""
    xs = np.asarray(xs, dtype=float)
    ys = np.asarray(ys, dtype=float)
    if xs.shape != ys.shape or xs.size < 3:
        raise ValueError("need at least three (x, y) pairs of equal length")
    if np.any(xs <= 0) or np.any(ys <= 0):
        raise ValueError("log-log fit needs strictly positive values")
    lx, ly = np.log(xs), np.log(ys)
    slope, intercept = np.polyfit(lx, ly, 1)
    resid = ly - (slope * lx + intercept)
    ss_tot = float(np.sum((ly - ly.mean()) ** 2))
    r2 = 1.0 - float(np.sum(resid**2)) / ss_tot if ss_tot > 0 else 1.0
    return float(slope), float(intercept), r2


def count_inversions(values) -> int:
    """Number of adjacent increases in a sequence expected to be non-increasing."""
    v = np.asarray(values, dtype=float)
    return int(np.sum(np.diff(v) > 0))
