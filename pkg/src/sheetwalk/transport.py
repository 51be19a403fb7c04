"""Exact event-driven uniform transport processes.

A uniform transport process with intensity index ``n`` is

    X_n(t) = n**-0.5 * A * integral_0^{t n} (-1)**N(u) du,    t in [0, 1],

with ``N`` a rate-1 Poisson process and ``A`` a fair random sign.  The
integrand is piecewise constant, so the integral is a signed sum of the
gaps between consecutive jumps and is evaluated exactly, without any
time discretisation.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numba
import numpy as np

from .rng import exponential, fair_sign, make_rng

CHUNK = 1 << 20
STREAMING_THRESHOLD = 10**7


@dataclass(frozen=True)
class PoissonJumpStream:
    """Ascending jump times of a Poisson process of ``rate`` on (0, horizon]."""

    rate: float
    horizon: float
    jumps: np.ndarray

    def __len__(self):
        return len(self.jumps)


def _check_rate_horizon(rate, horizon):
    if not (math.isfinite(rate) and rate > 0):
        raise ValueError(f"rate must be finite and positive, got {rate!r}")
    if not (math.isfinite(horizon) and horizon >= 0):
        raise ValueError(f"horizon must be finite and nonnegative, got {horizon!r}")


def chunk_sizes(rate: float, horizon: float):
    """Draw-size schedule shared by the stored and the streaming samplers.

    The first chunk covers the horizon with overwhelming probability; later
    chunks are fixed-size so a stream can be regenerated piece by piece.
    """
    mean = rate * horizon
    yield min(int(math.ceil(mean + 6.0 * math.sqrt(mean) + 16.0)), CHUNK)
    while True:
        yield CHUNK


@numba.njit(cache=True)
def _accumulate_jumps(gaps, last, horizon):
    out = np.empty(gaps.shape[0])
    k = 0
    for i in range(gaps.shape[0]):
        nxt = last + gaps[i]
        if nxt > horizon:
            return out[:k], last, True
        out[k] = nxt
        k += 1
        last = nxt
    return out[:k], last, False


@numba.njit(cache=True)
def _signed_prefix(jumps, last, total, comp, flip):
    # Neumaier-compensated running integral of the sign process at each jump.
    out = np.empty(jumps.shape[0])
    for i in range(jumps.shape[0]):
        term = flip * (jumps[i] - last)
        s = total + term
        if abs(total) >= abs(term):
            comp += (total - s) + term
        else:
            comp += (term - s) + total
        total = s
        out[i] = total + comp
        last = jumps[i]
        flip = -flip
    return out, last, total, comp, flip


def _iter_jump_chunks(rate, horizon, rng):
    if horizon == 0:
        return
    last = 0.0
    for size in chunk_sizes(rate, horizon):
        part, last, done = _accumulate_jumps(exponential(rng, rate, size), last, float(horizon))
        yield part
        if done:
            return


def sample_jump_stream(rate: float, horizon: float, rng: np.random.Generator) -> PoissonJumpStream:
    """Partial sums of iid Exp(rate) gaps, truncated at ``horizon``."""
    _check_rate_horizon(rate, horizon)
    parts = list(_iter_jump_chunks(rate, horizon, rng))
    jumps = np.concatenate(parts) if parts else np.empty(0)
    return PoissonJumpStream(float(rate), float(horizon), jumps)


def _check_t(t):
    if not (0.0 <= t <= 1.0):
        raise ValueError(f"t must lie in [0, 1], got {t!r}")


def _check_grid(grid):
    grid = np.asarray(grid, dtype=float)
    if grid.ndim != 1:
        raise ValueError("grid must be one-dimensional")
    if grid.size and (grid[0] < 0.0 or grid[-1] > 1.0):
        raise ValueError("grid points must lie in [0, 1]")
    if np.any(np.diff(grid) < 0):
        raise ValueError("grid must be sorted ascending")
    return grid


@dataclass(frozen=True)
class TransportPath:
    """One uniform transport process, stored as its jump stream.

    ``prefix[k]`` holds the exact signed area of the sign process on
    ``[0, jumps[k-1]]`` (``prefix[0] == 0``); evaluation only needs one lookup.
    """

    n: int
    sign0: int
    stream: PoissonJumpStream
    prefix: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if self.n < 1:
            raise ValueError(f"n must be a positive integer, got {self.n!r}")
        if self.sign0 not in (1, -1):
            raise ValueError("sign0 must be +1 or -1")
        if self.stream.horizon < self.n:
            raise ValueError("jump stream horizon must cover [0, n]")
        areas = _signed_prefix(self.stream.jumps, 0.0, 0.0, 0.0, 1.0)[0]
        object.__setattr__(self, "prefix", np.concatenate(([0.0], areas)))

    @property
    def jumps(self):
        return self.stream.jumps

    def value(self, t: float) -> float:
        return transport_value(self, t)

    def values(self, grid) -> np.ndarray:
        return transport_values_on_grid(self, grid)


def sample_transport_path(n: int, seed: int) -> TransportPath:
    """Build the path for ``seed``: sign bit first, then the rate-1 stream on [0, n]."""
    rng = make_rng(seed)
    sign0 = fair_sign(rng)
    return TransportPath(int(n), sign0, sample_jump_stream(1.0, float(n), rng))


def transport_value(path: TransportPath, t: float) -> float:
    _check_t(t)
    tau = t * path.n
    k = int(np.searchsorted(path.stream.jumps, tau, side="right"))
    last = float(path.stream.jumps[k - 1]) if k else 0.0
    flip = -1.0 if k & 1 else 1.0
    area = float(path.prefix[k]) + flip * (tau - last)
    return path.sign0 * area / math.sqrt(path.n)


def transport_values_on_grid(path: TransportPath, grid) -> np.ndarray:
    """Evaluate at every point of an ascending grid; bitwise equal to :func:`transport_value`."""
    grid = _check_grid(grid)
    jumps = path.stream.jumps
    tau = grid * path.n
    k = np.searchsorted(jumps, tau, side="right")
    last = np.where(k > 0, jumps[np.maximum(k - 1, 0)] if jumps.size else 0.0, 0.0)
    flip = np.where(k & 1, -1.0, 1.0)
    area = path.prefix[k] + flip * (tau - last)
    return path.sign0 * area / math.sqrt(path.n)


class StreamingTransportPath:
    """Transport path that regenerates its jumps from the seed on every evaluation.

    Holds O(1) memory regardless of ``n``; results are bitwise identical to
    ``sample_transport_path(n, seed)``.
    """

    def __init__(self, n: int, seed: int):
        if n < 1:
            raise ValueError(f"n must be a positive integer, got {n!r}")
        self.n = int(n)
        self.seed = seed
        self.sign0 = fair_sign(make_rng(seed))

    def values(self, grid) -> np.ndarray:
        grid = _check_grid(grid)
        tau = grid * self.n
        out = np.empty_like(tau)
        rng = make_rng(self.seed)
        fair_sign(rng)
        last, total, comp, flip = 0.0, 0.0, 0.0, 1.0
        prev_area, prev_jump, count = 0.0, 0.0, 0
        pos = 0
        for part in _iter_jump_chunks(1.0, float(self.n), rng):
            areas, last, total, comp, flip = _signed_prefix(part, last, total, comp, flip)
            hi = np.searchsorted(tau, part[-1], side="left") if part.size else pos
            pos = self._fill(out, tau, pos, hi, part, areas, prev_area, prev_jump, count)
            if part.size:
                prev_area, prev_jump = float(areas[-1]), float(part[-1])
                count += part.size
        # points at or beyond the final jump
        sel = slice(pos, tau.size)
        k_flip = -1.0 if count & 1 else 1.0
        out[sel] = prev_area + k_flip * (tau[sel] - prev_jump)
        return self.sign0 * out / math.sqrt(self.n)

    @staticmethod
    def _fill(out, tau, lo, hi, part, areas, prev_area, prev_jump, count):
        if hi <= lo:
            return lo
        seg = tau[lo:hi]
        j = np.searchsorted(part, seg, side="right")
        base = np.where(j > 0, areas[np.maximum(j - 1, 0)], prev_area)
        last = np.where(j > 0, part[np.maximum(j - 1, 0)], prev_jump)
        flip = np.where((count + j) & 1, -1.0, 1.0)
        out[lo:hi] = base + flip * (seg - last)
        return hi

    def value(self, t: float) -> float:
        _check_t(t)
        return float(self.values([t])[0])


def transport_path(n: int, seed: int, streaming: bool | None = None):
    """Stored path for desk-scale ``n``; streaming evaluation above 10**7 unless forced."""
    if streaming is None:
        streaming = n > STREAMING_THRESHOLD
    return StreamingTransportPath(n, seed) if streaming else sample_transport_path(n, seed)


def transport_variance_exact(n: int, t: float) -> float:
    """E[X_n(t)**2] = t - (1 - exp(-2 n t)) / (2 n)."""
    if n < 1:
        raise ValueError(f"n must be a positive integer, got {n!r}")
    _check_t(t)
    return t + math.expm1(-2.0 * n * t) / (2.0 * n)
