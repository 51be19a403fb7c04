"""Replicated Monte Carlo experiments.

Replication ``r`` of an experiment with master seed ``s`` always uses the
seed ``derive_seed(s, "rep", r)``, and results are collected in replication
order, so outputs do not depend on the number of worker processes.
"""
from __future__ import annotations

import functools
import math
from concurrent.futures import ProcessPoolExecutor

import numpy as np

from . import coupling
from .coupling import TailEstimate
from .rng import derive_seed
from .sheet import SheetParams, build_sheet, sheet_value_dparam
from .stats import count_inversions, loglog_slope
from .transport import sample_transport_path


def rep_seed(master_seed: int, r: int) -> int:
    return derive_seed(master_seed, "rep", r)


def parallel_map(fn, items, workers: int = 1, chunksize: int | None = None):
    """``list(map(fn, items))``, optionally fanned out over processes, order kept."""
    items = list(items)
    if workers <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    if chunksize is None:
        chunksize = max(1, len(items) // (4 * workers))
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items, chunksize=chunksize))


def _batched(fn, master_seed, reps, workers, batch=None):
    """Run ``fn(seeds)`` over batches of replication seeds and concatenate."""
    seeds = [rep_seed(master_seed, r) for r in range(reps)]
    if batch is None:
        batch = max(1, math.ceil(reps / (8 * max(workers, 1))))
    chunks = [seeds[i:i + batch] for i in range(0, reps, batch)]
    parts = parallel_map(fn, chunks, workers, chunksize=1)
    return np.concatenate(parts)


def _transport_batch(seeds, n, ts):
    return np.array([sample_transport_path(n, s).values(ts) for s in seeds])


def transport_samples(n: int, ts, reps: int, master_seed: int, workers: int = 1) -> np.ndarray:
    """``reps x len(ts)`` array of X_n(t), one independent path per row."""
    ts = np.asarray(ts, dtype=float)
    fn = functools.partial(_transport_batch, n=n, ts=ts)
    return _batched(fn, master_seed, reps, workers)


def _sheet_batch(seeds, params, points):
    out = np.empty((len(seeds), len(points)))
    for i, s in enumerate(seeds):
        sheet = build_sheet(params, s)
        out[i] = [sheet_value_dparam(sheet, p) for p in points]
    return out


def sheet_samples(params: SheetParams, points, reps: int, master_seed: int, workers: int = 1) -> np.ndarray:
    """``reps x len(points)`` array of W_n evaluated at fixed points."""
    fn = functools.partial(_sheet_batch, params=params, points=[tuple(p) for p in points])
    return _batched(fn, master_seed, reps, workers)


def _schedule_batch(seeds, n, lam, bm_step):
    rows = []
    for s in seeds:
        real = coupling.coupled_realization(n, lam, s, bm_step=bm_step)
        for sch in real.schedules:
            rows.append(np.stack([sch.sigma, sch.increments, sch.gamma]))
    return np.concatenate(rows, axis=1)


def embedding_samples(n: int, lam: float, reps: int, master_seed: int, workers: int = 1, bm_step=None):
    """Pooled (sigma, exit increment, gamma) over all strips of ``reps`` realizations."""
    fn = functools.partial(_schedule_batch, n=n, lam=lam, bm_step=bm_step)
    seeds = [rep_seed(master_seed, r) for r in range(reps)]
    parts = parallel_map(fn, [[s] for s in seeds], workers, chunksize=1)
    sigma, inc, gamma = np.concatenate(parts, axis=1)
    return sigma, inc, gamma


def _deviation_one(seeds, n, lam, bm_step):
    return np.array([coupling.schedule_deviations(n, lam, s, bm_step=bm_step) for s in seeds])


def schedule_deviation_samples(n: int, lam: float, reps: int, master_seed: int, workers: int = 1, bm_step=None):
    """``reps x 2`` array: per replication, max clock and max stop-time deviation."""
    fn = functools.partial(_deviation_one, n=n, lam=lam, bm_step=bm_step)
    return _batched(fn, master_seed, reps, workers)


def sigma_tail_probability(n: int, lam: float, eps: float, reps: int, master_seed: int,
                           workers: int = 1, bm_step=None) -> TailEstimate:
    """Empirical P(max over strips and i of |sum sigma - i / (2n^2)| >= eps)."""
    if reps < 100:
        raise ValueError("tail estimates need at least 100 replications")
    SheetParams(n, lam, 2)
    dev = schedule_deviation_samples(n, lam, reps, master_seed, workers, bm_step)
    return coupling.tail_estimates(dev[:, 1], eps)


def gamma_tail_probability(n: int, lam: float, eps: float, reps: int, master_seed: int,
                           workers: int = 1, bm_step=None) -> TailEstimate:
    """Empirical P(max over strips and i of |sum gamma - i / (2n^2)| >= eps)."""
    if reps < 100:
        raise ValueError("tail estimates need at least 100 replications")
    SheetParams(n, lam, 2)
    dev = schedule_deviation_samples(n, lam, reps, master_seed, workers, bm_step)
    return coupling.tail_estimates(dev[:, 0], eps)


def gamma_tail_bound(n: int, lam: float, eps: float) -> float:
    """Kolmogorov-inequality bound 1 / (2 eps^2 n^(2 - lam))."""
    return 1.0 / (2.0 * eps * eps * n ** (2.0 - lam))


def _sup_error_batch(seeds, n, lam, refine, bm_step):
    return np.array([
        coupling.coupled_sup_error(coupling.coupled_realization(n, lam, s, bm_step=bm_step), refine)
        for s in seeds
    ])


def sup_error_samples(n: int, lam: float, reps: int, master_seed: int, refine: int = 4,
                      workers: int = 1, bm_step=None) -> np.ndarray:
    fn = functools.partial(_sup_error_batch, n=n, lam=lam, refine=refine, bm_step=bm_step)
    return _batched(fn, master_seed, reps, workers)


def convergence_table(ns, lam: float, reps: int, master_seed: int, refine: int = 4,
                      workers: int = 1, bm_step=None) -> dict:
    """Median coupled sup error per n, with its log-log slope.

    Each n uses its own derived master seed, so adding or removing schedule
    entries leaves the other rows unchanged.
    """
    ns = [int(n) for n in ns]
    if len(ns) < 3 or any(b <= a for a, b in zip(ns, ns[1:])):
        raise ValueError("n schedule must be strictly ascending with at least 3 values")
    rows = []
    for n in ns:
        errs = sup_error_samples(n, lam, reps, derive_seed(master_seed, "n", n), refine, workers, bm_step)
        rows.append({
            "n": n,
            "strips": SheetParams(n, lam, 2).strips_per_axis,
            "median_sup_error": float(np.median(errs)),
            "mean_sup_error": float(np.mean(errs)),
        })
    medians = [r["median_sup_error"] for r in rows]
    slope, intercept, r2 = loglog_slope(ns, medians)
    return {
        "rows": rows,
        "slope": slope,
        "intercept": intercept,
        "r2": r2,
        "inversions": count_inversions(medians),
    }
