"""Skorokhod-embedding coupling of the transport sheet with a Brownian sheet.

Each strip of the sheet is driven by a standard Brownian path.  Symmetric
exponential increments ``K * eta`` (``eta ~ Exp(2n)``) are embedded into that
path one after another by randomised two-sided barriers; the embedding
durations are the stopping intervals ``sigma`` and the clocks are
``gamma = |increment| / n``.  The approximating strip is the piecewise-linear
path through ``(cumsum(gamma), W(cumsum(sigma)))``, which moves with slope
``+-n``: a transport path built from the same Brownian motion as ``W``.

Exit detection runs on a fine grid of the Brownian path, read as its linear
interpolant, with an optional Brownian-bridge check for excursions between
grid points.  Exit values are pinned to the barrier that was hit.
"""
from __future__ import annotations

import math
import time
from dataclasses import dataclass, field

import numba
import numpy as np

from .gaussian import BrownianPath, simulate_bm_path
from .rng import derive_seed, exponential, make_rng, open_uniform
from .sheet import SheetParams
from .stats import exp_cdf, ks_test, MIN_KS_SAMPLES

HORIZONS = (1.5, 2.0)
UNIFORM_CHUNK = 1 << 14
# bridge crossing probabilities below this are treated as zero (no uniform drawn)
BRIDGE_CUTOFF = 1e-15


class HorizonExhausted(RuntimeError):
    """The Brownian path ended before an embedding exited its barriers."""

    def __init__(self, index, horizon):
        super().__init__(f"Brownian path horizon {horizon:g} exhausted at embedding {index}")
        self.index = index
        self.horizon = horizon


def default_bm_step(n: int) -> float:
    return min(1e-6, 1.0 / (64.0 * n * n))


def sample_signed_exp(n: int, rng: np.random.Generator, size=None):
    """Direct draws of K * eta with K a fair sign and eta ~ Exp(2n)."""
    sign = 1.0 - 2.0 * rng.integers(0, 2, size=size)
    return sign * exponential(rng, 2.0 * n, size)


@dataclass(frozen=True)
class BarrierPair:
    alpha: float
    beta: float

    def __post_init__(self):
        if not (self.alpha <= 0.0 <= self.beta):
            raise ValueError(f"need alpha <= 0 <= beta, got ({self.alpha}, {self.beta})")
        if self.alpha == 0.0 and self.beta == 0.0:
            raise ValueError("degenerate barrier pair (0, 0)")


def sample_barrier_arrays(n: int, count: int, rng: np.random.Generator):
    """Vectorised barrier randomisation for the symmetric Exp(2n) target.

    The pair density is proportional to ``(beta - alpha) f(-alpha) f(beta)``.
    It splits into two equally weighted product laws: one side Gamma(2, 2n)
    (a sum of two Exp(2n)), the other Exp(2n).  Draw order: side choices,
    then three exponential arrays.
    """
    rate = 2.0 * n
    upper_big = rng.integers(0, 2, size=count).astype(bool)
    e1 = exponential(rng, rate, count)
    e2 = exponential(rng, rate, count)
    e3 = exponential(rng, rate, count)
    big, small = e1 + e2, e3
    beta = np.where(upper_big, big, small)
    alpha = -np.where(upper_big, small, big)
    return alpha, beta


def sample_barrier_pair(n: int, rng: np.random.Generator) -> BarrierPair:
    if n < 1:
        raise ValueError(f"n must be a positive integer, got {n!r}")
    alpha, beta = sample_barrier_arrays(n, 1, rng)
    return BarrierPair(float(alpha[0]), float(beta[0]))


@numba.njit(cache=True)
def _embed_kernel(values, step, alphas, betas, j, seg, tc, xc, level, pinned,
                  uniforms, uc, use_bridge, stop_times, levels, bridged):
    # status: 0 all embedded, 1 path exhausted, 2 uniforms exhausted.
    # pinned: (tc, xc) is a bridge-exit knot, off the grid interpolant, until the
    # current segment is left.
    last = values.shape[0] - 1
    nemb = alphas.shape[0]
    while j < nemb:
        lo = level + alphas[j]
        hi = level + betas[j]
        exited = False
        while not exited:
            if seg >= last:
                return 1, j, seg, tc, xc, level, pinned, uc
            t_end = (seg + 1) * step
            x_end = values[seg + 1]
            if x_end >= hi:
                tau = tc + (t_end - tc) * ((hi - xc) / (x_end - xc))
                new, hit_bridge, exited = hi, False, True
            elif x_end <= lo:
                tau = tc + (t_end - tc) * ((xc - lo) / (xc - x_end))
                new, hit_bridge, exited = lo, False, True
            else:
                h = t_end - tc
                if use_bridge and h > 0.0:
                    pb = math.exp(-2.0 * (hi - xc) * (hi - x_end) / h)
                    pa = math.exp(-2.0 * (xc - lo) * (x_end - lo) / h)
                    if pa + pb > BRIDGE_CUTOFF:
                        if uc >= uniforms.shape[0]:
                            return 2, j, seg, tc, xc, level, pinned, uc
                        u = uniforms[uc]
                        uc += 1
                        if u < pb:
                            tau, new, hit_bridge, exited = tc + 0.5 * h, hi, True, True
                        elif u < pb + pa:
                            tau, new, hit_bridge, exited = tc + 0.5 * h, lo, True, True
                if not exited:
                    seg += 1
                    tc = t_end
                    xc = x_end
                    pinned = False
        stop_times[j] = tau
        levels[j] = new
        bridged[j] = hit_bridge or pinned
        pinned = pinned or hit_bridge
        level = new
        tc = tau
        xc = new
        j += 1
    return 0, j, seg, tc, xc, level, pinned, uc


def _run_embeddings(bm: BrownianPath, start_time, alphas, betas, rng, bridge):
    count = alphas.shape[0]
    stop_times = np.empty(count)
    levels = np.empty(count)
    bridged = np.zeros(count, dtype=np.bool_)
    seg = min(int(start_time / bm.step), len(bm.values) - 1)
    xc = float(bm.value_at(start_time)) if start_time > 0 else float(bm.values[0])
    state = (0, seg, float(start_time), xc, xc, False)
    uniforms, uc = np.empty(0), 0
    while True:
        status, *rest = _embed_kernel(bm.values, bm.step, alphas, betas, *state,
                                      uniforms, uc, bridge, stop_times, levels, bridged)
        *state_list, uc = rest
        state = tuple(state_list)
        if status == 0:
            return stop_times, levels, bridged
        if status == 1:
            raise HorizonExhausted(state[0], bm.horizon)
        uniforms, uc = open_uniform(rng, UNIFORM_CHUNK), 0


def embed_one(bm: BrownianPath, start_time: float, pair: BarrierPair, rng=None, bridge=True):
    """Embed one increment starting at ``start_time``.

    Returns ``(tau, exit_value)``: the time spent until the path increment
    leaves ``(alpha, beta)`` and the barrier it left through.
    """
    if not 0.0 <= start_time < bm.horizon:
        raise ValueError("start_time must lie inside the path horizon")
    if bridge and rng is None:
        raise ValueError("bridge correction needs a generator for its uniforms")
    stop, levels, _ = _run_embeddings(bm, float(start_time), np.array([pair.alpha]),
                                      np.array([pair.beta]), rng, bridge)
    start_value = float(bm.value_at(start_time)) if start_time > 0 else float(bm.values[0])
    exit_value = pair.beta if levels[0] == start_value + pair.beta else pair.alpha
    return float(stop[0] - start_time), exit_value


@dataclass(frozen=True)
class EmbeddingSchedule:
    """Successive embeddings of 2 n**2 symmetric Exp(2n) increments into one path.

    ``stop_times`` are the partial sums of ``sigma``; ``embedded_values`` the
    Brownian values there.  ``bridged`` marks stops located by the bridge
    check (or inside the same grid step as one), whose value is the barrier
    rather than the grid interpolant.
    """

    n: int
    stop_times: np.ndarray
    embedded_values: np.ndarray
    increments: np.ndarray
    gamma: np.ndarray
    bridged: np.ndarray
    sigma: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        object.__setattr__(self, "sigma", np.diff(self.stop_times, prepend=0.0))

    @property
    def count(self):
        return len(self.stop_times)

    @property
    def knot_times(self):
        return np.concatenate(([0.0], np.cumsum(self.gamma)))


def build_schedule(bm: BrownianPath, n: int, rng: np.random.Generator, bridge=True) -> EmbeddingSchedule:
    """Embed 2 n**2 increments sequentially from time 0.

    Draws all barrier pairs first, then bridge uniforms in fixed-size chunks.
    """
    if n < 1:
        raise ValueError(f"n must be a positive integer, got {n!r}")
    alphas, betas = sample_barrier_arrays(n, 2 * n * n, rng)
    stop_times, levels, bridged = _run_embeddings(bm, 0.0, alphas, betas, rng, bridge)
    hit_upper = levels == np.concatenate(([0.0], levels[:-1])) + betas
    increments = np.where(hit_upper, betas, alphas)
    gamma = np.abs(increments) / n
    return EmbeddingSchedule(int(n), stop_times, levels, increments, gamma, bridged)


@dataclass(frozen=True)
class PiecewiseLinearPath:
    """Linear interpolation through knots; constant after the last knot."""

    times: np.ndarray
    values: np.ndarray

    def __call__(self, t):
        out = np.interp(t, self.times, self.values)
        return float(out) if np.ndim(out) == 0 else out

    def slopes(self):
        return np.diff(self.values) / np.diff(self.times)


def reconstruct_strip(schedule: EmbeddingSchedule, bm: BrownianPath | None = None) -> PiecewiseLinearPath:
    """Approximating strip pinned to the Brownian values at the stop times."""
    if bm is not None and schedule.stop_times[-1] > bm.horizon:
        raise ValueError("schedule extends past the Brownian path")
    return PiecewiseLinearPath(schedule.knot_times, np.concatenate(([0.0], schedule.embedded_values)))


@dataclass(frozen=True)
class CoupledRealization:
    """Brownian strips and their transport reconstructions on one probability space."""

    params: SheetParams
    seed: int
    paths: list
    schedules: list
    strips: list

    @property
    def amplitude(self):
        return self.params.n ** (-self.params.lam / 2.0)

    def brownian(self, l: int, t):
        """W(l / n**lam, t) from the strip Brownian paths."""
        acc = np.zeros(np.shape(t))
        for bm in self.paths[:l]:
            acc = acc + bm.value_at(t)
        return self.amplitude * acc

    def approximation(self, l: int, t):
        """W_n(l / n**lam, t) from the reconstructed strips."""
        acc = np.zeros(np.shape(t))
        for strip in self.strips[:l]:
            acc = acc + strip(t)
        return self.amplitude * acc

    def approximation_at(self, s: float, t: float) -> float:
        j, w = self.params.cell_coordinate(s)
        acc = sum(strip(t) for strip in self.strips[:j])
        if w:
            acc += w * self.strips[j](t)
        return self.amplitude * acc


def _strip_schedule(n, seed, k, step, bridge, horizons):
    bm = simulate_bm_path(step, horizons[0], make_rng(derive_seed(seed, "bm", k)))
    for i, horizon in enumerate(horizons):
        if i:
            bm = bm.extended(horizon, make_rng(derive_seed(seed, "bm-extend", (k, i))))
        try:
            schedule = build_schedule(bm, n, make_rng(derive_seed(seed, "embed", k)), bridge)
        except HorizonExhausted:
            if i == len(horizons) - 1:
                raise
            continue
        return bm, schedule


def coupled_realization(n: int, lam: float, master_seed: int, *, bridge=True, bm_step=None,
                        horizons=None) -> CoupledRealization:
    """One joint sample of the Brownian strips and the transport sheet built on them."""
    horizons = HORIZONS if horizons is None else tuple(horizons)
    params = SheetParams(int(n), float(lam), 2)
    step = default_bm_step(n) if bm_step is None else float(bm_step)
    paths, schedules, strips = [], [], []
    for k in range(1, params.strips_per_axis + 1):
        bm, schedule = _strip_schedule(params.n, master_seed, k, step, bridge, horizons)
        paths.append(bm)
        schedules.append(schedule)
        strips.append(reconstruct_strip(schedule, bm))
    return CoupledRealization(params, master_seed, paths, schedules, strips)


def coupled_sup_error(real: CoupledRealization, refine: int = 4) -> float:
    """Max of |W_n - W| over k / n**lam (k <= floor(n**lam)) and i / (2 n**2 refine)."""
    if refine < 1:
        raise ValueError("refinement factor must be >= 1")
    n = real.params.n
    t = np.arange(2 * n * n * refine + 1) / (2.0 * n * n * refine)
    acc = np.zeros_like(t)
    worst = 0.0
    for bm, strip in zip(real.paths, real.strips):
        acc = acc + (strip(t) - bm.value_at(t))
        worst = max(worst, float(np.max(np.abs(acc))))
    return real.amplitude * worst


def strip_statistics(schedule: EmbeddingSchedule) -> dict:
    sigma = schedule.sigma
    gamma = schedule.gamma
    se = float(sigma.std(ddof=1) / math.sqrt(sigma.size)) if sigma.size > 1 else None
    ks = None
    if gamma.size >= MIN_KS_SAMPLES:
        ks = ks_test(gamma, exp_cdf(2.0 * schedule.n * schedule.n)).p_value
    return {"mean_sigma": float(sigma.mean()), "mean_sigma_se": se, "ks_gamma_pvalue": ks}


def coupling_record(n, lam, seed, refine=4, bridge=True, bm_step=None, timing=False) -> dict:
    """Experiment record for one realization (JSON-ready)."""
    start = time.perf_counter()
    real = coupled_realization(n, lam, seed, bridge=bridge, bm_step=bm_step)
    err = coupled_sup_error(real, refine)
    sigma = np.concatenate([s.sigma for s in real.schedules])
    record = {
        "n": int(n),
        "lambda": float(lam),
        "seed": int(seed),
        "strips": real.params.strips_per_axis,
        "embeddings": int(sum(s.count for s in real.schedules)),
        "sup_error": err,
        "mean_sigma": float(sigma.mean()),
        "mean_sigma_se": float(sigma.std(ddof=1) / math.sqrt(sigma.size)),
        "target_mean_sigma": 1.0 / (2.0 * n * n),
        "per_strip": [strip_statistics(s) for s in real.schedules],
        "runtime_ms": None,
    }
    if timing:
        record["runtime_ms"] = round((time.perf_counter() - start) * 1000.0, 3)
    return record


def max_deviation(partial_sums, n):
    """max_i |S_i - i / (2 n**2)| for partial sums S_1..S_{2n^2}."""
    i = np.arange(1, len(partial_sums) + 1)
    return float(np.max(np.abs(partial_sums - i / (2.0 * n * n))))


def schedule_deviations(n, lam, seed, bridge=True, bm_step=None):
    """Max clock and stop-time deviations over all strips of one realization."""
    real = coupled_realization(n, lam, seed, bridge=bridge, bm_step=bm_step)
    gamma_dev = max(max_deviation(np.cumsum(s.gamma), n) for s in real.schedules)
    sigma_dev = max(max_deviation(s.stop_times, n) for s in real.schedules)
    return gamma_dev, sigma_dev


@dataclass(frozen=True)
class TailEstimate:
    probability: float
    hits: int
    reps: int

    @property
    def degenerate(self) -> bool:
        """All-zero tail count: an upper bound, not an estimate."""
        return self.hits == 0

    def as_dict(self):
        return {"probability": self.probability, "hits": self.hits, "reps": self.reps,
                "degenerate": self.degenerate}


def tail_estimates(deviations, eps) -> TailEstimate:
    dev = np.asarray(deviations)
    hits = int(np.sum(dev >= eps))
    return TailEstimate(hits / dev.size, hits, int(dev.size))
