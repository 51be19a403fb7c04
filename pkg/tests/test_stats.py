import math

import numpy as np
import pytest
from scipy import stats as sps

from sheetwalk.rng import make_rng
from sheetwalk.stats import (count_inversions, empirical_covariance, exp_cdf, ks_2samp, ks_test,
                             loglog_slope, normal_cdf, summarize, symmetric_exp_cdf, variance_with_se,
                             within_band)


def test_cdf_probes():
    assert exp_cdf(2.0)(0.0) == 0.0
    assert normal_cdf(0, 1)(0.0) == 0.5
    n = 7
    assert exp_cdf(2 * n * n)(1 / (2 * n * n)) == pytest.approx(1 - math.exp(-1), rel=1e-15)
    assert symmetric_exp_cdf(3.0)(0.0) == 0.5
    with pytest.raises(ValueError):
        normal_cdf(0, 0)
    with pytest.raises(ValueError):
        exp_cdf(-1)


def test_ks_matches_scipy_asymptotic():
    x = make_rng(1).standard_normal(5000) * 1.1
    ours = ks_test(x, normal_cdf())
    ref = sps.kstest(x, "norm", method="asymp")
    assert ours.statistic == pytest.approx(ref.statistic, rel=1e-12)
    assert ours.p_value == pytest.approx(ref.pvalue, rel=1e-6)


def test_ks_2samp_matches_scipy_statistic():
    rng = make_rng(2)
    a, b = rng.standard_normal(700), rng.standard_normal(900) + 0.1
    assert ks_2samp(a, b).statistic == pytest.approx(sps.ks_2samp(a, b).statistic, rel=1e-12)


def test_ks_false_rejection_rate():
    rng = make_rng(3)
    rejects = sum(not ks_test(rng.standard_normal(100_000), normal_cdf()).passes() for _ in range(100))
    assert rejects <= 3


def test_ks_degenerate_sample():
    r = ks_test(np.zeros(500), exp_cdf(1.0))
    assert r.statistic == 1.0 and not r.passes()


def test_ks_disjoint_supports():
    r = ks_2samp(np.arange(200.0), np.arange(200.0) + 1000)
    assert r.statistic == 1.0 and not r.passes()


def test_ks_rejects_bad_input():
    with pytest.raises(ValueError):
        ks_test(np.zeros(50), normal_cdf())
    with pytest.raises(ValueError):
        ks_test(np.linspace(0, 1, 200), lambda x: 1 - x)


def test_covariance_estimator():
    rng = make_rng(4)
    x = rng.standard_normal(100_000)
    c, se = empirical_covariance(x, x)
    assert c == pytest.approx(np.var(x, ddof=1))
    y = rng.standard_normal(100_000)
    c, se = empirical_covariance(x, y)
    assert abs(c) <= 0.0095
    with pytest.raises(ValueError):
        empirical_covariance(x, y[:-1])
    with pytest.raises(ValueError):
        empirical_covariance(x[:10], y[:10])


def test_variance_se_on_normal():
    x = make_rng(5).standard_normal(40_000)
    var, se = variance_with_se(x)
    assert se == pytest.approx(math.sqrt(2 / x.size), rel=0.05)
    assert within_band(var, 1.0, se)


def test_loglog_slope():
    xs = np.array([1.0, 2, 4, 8])
    s, _, r2 = loglog_slope(xs, xs)
    assert s == pytest.approx(1.0) and r2 == pytest.approx(1.0)
    s, _, _ = loglog_slope(xs, 5 / xs**2)
    assert s == pytest.approx(-2.0)
    with pytest.raises(ValueError):
        loglog_slope(xs, np.array([1.0, 0, 1, 1]))
    with pytest.raises(ValueError):
        loglog_slope(xs[:2], xs[:2])


def test_inversions_and_summary():
    assert count_inversions([3, 2, 2.5, 1]) == 1
    assert count_inversions([3, 2, 1]) == 0
    s = summarize([1.0, 2.0, 3.0])
    assert (s.count, s.mean, s.variance) == (3, 2.0, 1.0)
    with pytest.raises(ValueError):
        summarize([1.0])
