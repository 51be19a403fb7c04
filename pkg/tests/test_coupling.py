import math

import numpy as np
import pytest

from sheetwalk import coupling
from sheetwalk.coupling import (BarrierPair, HorizonExhausted, build_schedule, coupled_realization,
                                coupled_sup_error, coupling_record, embed_one, reconstruct_strip,
                                sample_barrier_arrays, sample_barrier_pair, tail_estimates)
from sheetwalk.experiments import (embedding_samples, gamma_tail_bound, gamma_tail_probability,
                                   schedule_deviation_samples, sigma_tail_probability)
from sheetwalk.gaussian import simulate_bm_path
from sheetwalk.rng import make_rng
from sheetwalk.stats import exp_cdf, ks_2samp, ks_test, symmetric_exp_cdf

from oracles import barrier_pairs_by_rejection


# barrier pairs

def test_barrier_pair_signs_and_mean():
    n = 10
    a, b = sample_barrier_arrays(n, 100_000, make_rng(1))
    assert np.all(a <= 0) and np.all(b >= 0)
    se = b.std(ddof=1) / math.sqrt(b.size)
    # E[beta] = (1/2)(2/(2n)) + (1/2)(1/(2n)) = 3 / (4n)
    assert abs(b.mean() - 0.075) <= 3 * se


def test_barrier_pair_symmetric():
    a, b = sample_barrier_arrays(10, 50_000, make_rng(2))
    assert ks_2samp(-a, b).passes()


def test_barrier_pair_matches_rejection_oracle():
    n = 6
    a, b = sample_barrier_arrays(n, 40_000, make_rng(3))
    ra, rb = barrier_pairs_by_rejection(n, 40_000, np.random.default_rng(4))
    assert ks_2samp(a, ra).passes()
    assert ks_2samp(b, rb).passes()
    assert ks_2samp(b - a, rb - ra).passes()


def test_barrier_pair_validation():
    with pytest.raises(ValueError):
        BarrierPair(0.0, 0.0)
    with pytest.raises(ValueError):
        BarrierPair(0.1, 0.2)
    with pytest.raises(ValueError):
        sample_barrier_pair(0, make_rng(0))
    p = sample_barrier_pair(3, make_rng(0))
    assert p.alpha <= 0 <= p.beta


# single embeddings

def test_embed_one_mean_and_exit_law():
    n, step = 10, 1e-5
    rng = make_rng(5)
    bm = simulate_bm_path(step, 60.0, make_rng(6))
    t, taus, exits = 0.0, [], []
    for _ in range(10_000):
        pair = sample_barrier_pair(n, rng)
        tau, x = embed_one(bm, t, pair, rng)
        assert x in (pair.alpha, pair.beta)
        taus.append(tau)
        exits.append(x)
        t += tau
    taus = np.array(taus)
    se = taus.std(ddof=1) / math.sqrt(taus.size)
    assert abs(taus.mean() - 1 / (2 * n * n)) <= 3 * se
    assert ks_test(np.array(exits), symmetric_exp_cdf(2.0 * n)).passes()


def test_embed_one_horizon_exhausted():
    bm = simulate_bm_path(1e-4, 1e-3, make_rng(7))
    with pytest.raises(HorizonExhausted):
        embed_one(bm, 0.0, BarrierPair(-50.0, 50.0), make_rng(8))


def test_embed_one_needs_rng_for_bridge():
    bm = simulate_bm_path(1e-3, 1.0, make_rng(7))
    with pytest.raises(ValueError):
        embed_one(bm, 0.0, BarrierPair(-0.1, 0.1))
    with pytest.raises(ValueError):
        embed_one(bm, 2.0, BarrierPair(-0.1, 0.1), make_rng(0))


# schedules

def test_schedule_n1():
    bm = simulate_bm_path(1e-6, 1.5, make_rng(9))
    sch = build_schedule(bm, 1, make_rng(10))
    assert sch.count == 2
    assert np.all(np.diff(sch.stop_times) > 0)
    assert np.all(sch.sigma > 0)
    assert np.allclose(np.abs(np.diff(sch.embedded_values, prepend=0.0)), np.abs(sch.increments))


def test_clock_mean_and_law():
    n = 10
    _, inc, gamma = embedding_samples(n, 0.19, 20, 11, bm_step=1e-5)
    se = gamma.std(ddof=1) / math.sqrt(gamma.size)
    assert abs(gamma.mean() - 1 / (2 * n * n)) <= 3 * se
    assert ks_test(gamma, exp_cdf(2.0 * n * n)).passes()
    assert np.array_equal(gamma, np.abs(inc) / n)


def test_moment_ratio_bounded():
    ratios = []
    for n in (4, 8, 16):
        sigma, _, _ = embedding_samples(n, 0.19, 10, 12 + n)
        ratios.append(np.mean(sigma**2) / (1.5 / n**4))
    assert max(ratios) < 10
    assert max(ratios) / min(ratios) < 2


def test_strip_passes_through_knots():
    real = coupled_realization(16, 0.19, 13)
    sch, strip, bm = real.schedules[0], real.strips[0], real.paths[0]
    assert strip(0.0) == 0.0
    assert np.array_equal(strip(sch.knot_times[1:]), sch.embedded_values)
    grid = ~sch.bridged
    assert np.allclose(bm.value_at(sch.stop_times[grid]), sch.embedded_values[grid], atol=1e-9)
    assert np.allclose(np.abs(strip.slopes()), 16, rtol=1e-9)
    end = sch.knot_times[-1]
    assert strip(min(end + 0.5, 3.0)) == strip(end)


def test_reconstruct_rejects_short_path():
    real = coupled_realization(4, 0.19, 14)
    short = simulate_bm_path(real.paths[0].step, 1e-3, make_rng(0))
    with pytest.raises(ValueError):
        reconstruct_strip(real.schedules[0], short)


def test_coupled_realization_basics():
    real = coupled_realization(64, 0.19, 15)
    assert len(real.strips) == 2
    assert real.approximation(2, 0.0) == 0.0 and real.brownian(2, 0.0) == 0.0
    assert real.approximation_at(0.0, 0.5) == 0.0
    again = coupled_realization(64, 0.19, 15)
    assert all(np.array_equal(a.stop_times, b.stop_times) for a, b in zip(real.schedules, again.schedules))
    assert coupled_sup_error(real) == coupled_sup_error(again)


def test_sup_error_decreases_with_n():
    small = np.median([coupled_sup_error(coupled_realization(8, 0.19, s)) for s in range(10)])
    large = np.median([coupled_sup_error(coupled_realization(128, 0.19, s)) for s in range(10)])
    assert large < small


def test_sup_error_refine_validation():
    with pytest.raises(ValueError):
        coupled_sup_error(coupled_realization(2, 0.19, 0), refine=0)


def test_horizon_exhausted_propagates():
    with pytest.raises(HorizonExhausted):
        coupled_realization(8, 0.19, 0, horizons=(0.05,))


def test_horizon_extension_recovers():
    real = coupled_realization(8, 0.19, 1, horizons=(0.3, 2.0))
    assert real.paths[0].horizon >= 1.0


def test_record_fields():
    rec = coupling_record(2, 0.19, 0)
    assert rec["strips"] == 1 and rec["embeddings"] == 8
    assert rec["runtime_ms"] is None
    assert coupling_record(2, 0.19, 0, timing=True)["runtime_ms"] > 0


# tail estimates

def test_tail_estimate_edges():
    dev = schedule_deviation_samples(8, 0.19, 100, 16)
    assert tail_estimates(dev[:, 1], 10.0).degenerate
    assert tail_estimates(dev[:, 1], 0.0).probability == 1.0
    with pytest.raises(ValueError):
        sigma_tail_probability(8, 0.19, 0.05, 50, 0)


def test_gamma_tail_bound_holds():
    eps = 0.1
    for n in (10, 20, 40):
        est = gamma_tail_probability(n, 0.19, eps, 100, 17 + n, bm_step=1e-5)
        assert est.probability <= gamma_tail_bound(n, 0.19, eps)


def test_fault_injection_is_detected():
    from sheetwalk.verification import knot_identity
    assert knot_identity(3).passed
    assert not knot_identity(3, inject_fault=True).passed


def test_default_step():
    assert coupling.default_bm_step(2) == 1e-6
    assert coupling.default_bm_step(256) == pytest.approx(1 / (64 * 256**2))
