"""Direct Gaussian simulation of Brownian motion and the d-parameter Wiener process.

This is the distributional reference for the transport approximation and
the source of the strip Brownian paths used by the coupling.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .rng import standard_normal


def covariance_exact(p, q) -> float:
    """Covariance of the d-parameter Wiener process: product of coordinate minima."""
    p = np.asarray(p, dtype=float)
    q = np.asarray(q, dtype=float)
    if p.shape != q.shape or p.ndim != 1:
        raise ValueError("points must be 1-d and of equal dimension")
    for x in (p, q):
        if np.any(x < 0) or np.any(x > 1):
            raise ValueError("points must lie in the unit cube")
    return float(np.prod(np.minimum(p, q)))


@dataclass(frozen=True)
class WienerGrid:
    """Values on the uniform tensor grid ``axes[i] = linspace(0, 1, m_i + 1)``."""

    axes: tuple
    values: np.ndarray

    @property
    def d(self):
        return len(self.axes)

    def at(self, *index):
        return float(self.values[index])


def simulate_sheet_grid(m, d: int, rng: np.random.Generator) -> WienerGrid:
    """Cumulative sums of iid N(0, cell volume) cell increments.

    ``m`` is the number of cells per axis, an int or a sequence of length ``d``.
    """
    if d < 1:
        raise ValueError("d must be at least 1")
    cells = (int(m),) * d if np.isscalar(m) else tuple(int(c) for c in m)
    if len(cells) != d:
        raise ValueError(f"need {d} per-axis cell counts, got {len(cells)}")
    if min(cells) < 1:
        raise ValueError("need at least one cell per axis")
    volume = math.prod(1.0 / c for c in cells)
    return grid_from_increments(standard_normal(rng, cells) * math.sqrt(volume))


def grid_from_increments(increments) -> WienerGrid:
    """Sum cell increments along every axis; the faces through the origin are 0."""
    field = np.asarray(increments, dtype=float)
    for axis in range(field.ndim):
        field = np.cumsum(field, axis=axis)
    values = np.pad(field, [(1, 0)] * field.ndim)
    axes = tuple(np.linspace(0.0, 1.0, c + 1) for c in field.shape)
    return WienerGrid(axes, values)


@dataclass(frozen=True)
class BrownianPath:
    """Standard Brownian motion sampled at ``k * step``, ``values[0] == 0``."""

    step: float
    values: np.ndarray

    @property
    def horizon(self) -> float:
        return self.step * (len(self.values) - 1)

    @property
    def times(self):
        return np.arange(len(self.values)) * self.step

    def value_at(self, t):
        """Piecewise-linear interpolation of the grid values."""
        t = np.asarray(t, dtype=float)
        if np.any(t < 0) or np.any(t > self.horizon * (1 + 1e-12)):
            raise ValueError("time outside the simulated horizon")
        pos = t / self.step
        i = np.minimum(np.floor(pos).astype(np.int64), len(self.values) - 2)
        frac = pos - i
        v = self.values
        out = v[i] + frac * (v[i + 1] - v[i])
        return float(out) if out.ndim == 0 else out

    def extended(self, horizon: float, rng: np.random.Generator) -> "BrownianPath":
        """Same path continued to ``horizon`` with fresh increments from ``rng``."""
        extra = _step_count(self.step, horizon) - (len(self.values) - 1)
        if extra <= 0:
            return self
        inc = standard_normal(rng, extra) * math.sqrt(self.step)
        tail = self.values[-1] + np.cumsum(inc)
        return BrownianPath(self.step, np.concatenate((self.values, tail)))


def _step_count(step, horizon):
    return int(math.ceil(horizon / step - 1e-9))


def simulate_bm_path(step: float, horizon: float, rng: np.random.Generator) -> BrownianPath:
    if not (math.isfinite(step) and step > 0):
        raise ValueError(f"step must be positive, got {step!r}")
    if not horizon >= step:
        raise ValueError(f"horizon must be at least one step, got {horizon!r}")
    inc = standard_normal(rng, _step_count(step, horizon)) * math.sqrt(step)
    return BrownianPath(float(step), np.concatenate(([0.0], np.cumsum(inc))))
