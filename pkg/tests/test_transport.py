import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from sheetwalk.rng import derive_seed, make_rng
from sheetwalk.stats import exp_cdf, ks_test
from sheetwalk.transport import (PoissonJumpStream, StreamingTransportPath, TransportPath,
                                 sample_jump_stream, sample_transport_path, transport_path,
                                 transport_value, transport_values_on_grid, transport_variance_exact)

from oracles import transport_oracle


def _path(n, sign0, jumps):
    return TransportPath(n, sign0, PoissonJumpStream(1.0, float(n), np.asarray(jumps, dtype=float)))


# jump streams

def test_zero_horizon_gives_empty_stream():
    s = sample_jump_stream(1.0, 0.0, make_rng(1))
    assert len(s) == 0


def test_jump_count_mean():
    counts = np.array([len(sample_jump_stream(1.0, 1e4, make_rng(derive_seed(3, "rep", r))))
                       for r in range(1000)])
    assert 9990.5 <= counts.mean() <= 10009.5


def test_gaps_are_exponential():
    s = sample_jump_stream(1.0, 1.2e5, make_rng(7))
    gaps = np.diff(s.jumps, prepend=0.0)[:100_000]
    assert gaps.size == 100_000
    assert ks_test(gaps, exp_cdf(1.0)).passes()


def test_jumps_ascending_within_horizon():
    s = sample_jump_stream(2.5, 300.0, make_rng(2))
    assert np.all(np.diff(s.jumps) > 0)
    assert s.jumps[0] > 0 and s.jumps[-1] <= 300.0


@pytest.mark.parametrize("rate,horizon", [(0.0, 1.0), (-1.0, 1.0), (math.inf, 1.0), (math.nan, 1.0),
                                          (1.0, -1.0), (1.0, math.inf)])
def test_bad_stream_arguments(rate, horizon):
    with pytest.raises(ValueError):
        sample_jump_stream(rate, horizon, make_rng(0))


def test_stream_longer_than_one_chunk_matches_streaming():
    # n large enough that the first chunk can be exceeded is costly; instead
    # check that stored and streaming evaluation agree bitwise at moderate n
    n = 200_000
    grid = np.linspace(0, 1, 257)
    stored = sample_transport_path(n, 11).values(grid)
    streamed = StreamingTransportPath(n, 11).values(grid)
    assert np.array_equal(stored, streamed)


# path values

def test_value_at_zero_is_zero():
    p = sample_transport_path(50, 4)
    assert transport_value(p, 0.0) == 0.0


def test_no_jumps_gives_linear_ramp():
    assert transport_value(_path(4, 1, []), 1.0) == 2.0


def test_two_jumps_cancel():
    assert transport_value(_path(4, 1, [1.0, 3.0]), 1.0) == 0.0


def test_agrees_with_exact_rational_oracle():
    n = 1000
    p = sample_transport_path(n, 99)
    for t in np.linspace(0, 1, 41):
        assert transport_value(p, t) == pytest.approx(transport_oracle(p.jumps, p.sign0, n, t),
                                                      rel=1e-12, abs=1e-12)


def test_grid_single_zero():
    p = sample_transport_path(10, 0)
    assert transport_values_on_grid(p, [0.0]).tolist() == [0.0]


def test_grid_bitwise_equals_pointwise():
    p = sample_transport_path(500, 5)
    grid = np.sort(make_rng(1).random(1000))
    vals = transport_values_on_grid(p, grid)
    assert all(vals[i] == transport_value(p, grid[i]) for i in range(grid.size))


@pytest.mark.parametrize("t", [-0.1, 1.1])
def test_time_outside_unit_interval(t):
    with pytest.raises(ValueError):
        transport_value(sample_transport_path(3, 0), t)


def test_unsorted_grid_rejected():
    with pytest.raises(ValueError):
        transport_values_on_grid(sample_transport_path(3, 0), [0.5, 0.2])


def test_bad_sign_or_n():
    with pytest.raises(ValueError):
        _path(4, 0, [])
    with pytest.raises(ValueError):
        TransportPath(0, 1, PoissonJumpStream(1.0, 1.0, np.empty(0)))


def test_slope_and_kinks():
    n = 9
    p = _path(n, -1, [2.0, 5.5])
    t = np.array([0.0, 1 / 9, 2 / 9, 4 / 9, 5.5 / 9, 7 / 9, 1.0])
    v = p.values(t)
    slopes = np.diff(v) / np.diff(t)
    assert np.allclose(slopes, [-3, -3, 3, 3, -3, -3])


def test_variance_formula_values():
    assert transport_variance_exact(100, 0.0) == 0.0
    assert transport_variance_exact(100, 1.0) == pytest.approx(0.995, rel=1e-15)


def test_variance_monte_carlo():
    from sheetwalk.experiments import transport_samples
    x = transport_samples(100, [1.0], 20_000, 13)[:, 0]
    target = transport_variance_exact(100, 1.0)
    se = np.std(x**2, ddof=1) / math.sqrt(x.size)
    assert abs(np.mean(x**2) - target) <= 3 * se


def test_streaming_selected_above_threshold():
    assert isinstance(transport_path(10**7 + 1, 0), StreamingTransportPath)
    assert isinstance(transport_path(10, 0), TransportPath)


# properties

seeds = st.integers(min_value=0, max_value=2**63)


@settings(max_examples=40, deadline=None)
@given(seed=seeds, n=st.integers(1, 400), t=st.floats(0, 1))
def test_bounded_by_ramp(seed, n, t):
    p = sample_transport_path(n, seed)
    assert abs(p.value(t)) <= t * math.sqrt(n) * (1 + 1e-12)


@settings(max_examples=40, deadline=None)
@given(seed=seeds, n=st.integers(1, 400), t=st.floats(0, 1))
def test_odd_in_initial_sign(seed, n, t):
    p = sample_transport_path(n, seed)
    q = TransportPath(p.n, -p.sign0, p.stream)
    assert q.value(t) == -p.value(t)


@settings(max_examples=25, deadline=None)
@given(seed=seeds, n=st.integers(1, 300))
def test_deterministic_and_streaming_identical(seed, n):
    grid = np.linspace(0, 1, 33)
    a = sample_transport_path(n, seed).values(grid)
    b = sample_transport_path(n, seed).values(grid)
    c = StreamingTransportPath(n, seed).values(grid)
    assert np.array_equal(a, b) and np.array_equal(a, c)
