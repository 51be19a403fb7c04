"""Strip-partitioned transport approximation of the Brownian sheet.

The first ``d - 1`` coordinates of ``[0, 1]**d`` are cut into cells of width
``n**-lam``; each cell of the resulting partition carries an independent
transport process in the last ("time") coordinate.  At the cell corners the
field is a nested sum of the strip processes scaled by
``n**(-(d - 1) * lam / 2)``; in between it is multilinear, and beyond the last
full cell it is constant along that axis.
"""
from __future__ import annotations

import itertools
import math
import warnings
from dataclasses import dataclass, field

import mpmath
import numpy as np

from .rng import derive_seed
from .transport import transport_path

THEOREM = "theorem"
EXPLORATORY = "exploratory"


class OutsideTheoremWarning(UserWarning):
    """lam is outside the range where almost-sure convergence is proven."""


def theorem_lambda_bound(d: int) -> float:
    return 1.0 / (5.0 * (d - 1))


def scaled_power(n: int, lam: float):
    """Return ``(n**lam, floor(n**lam))`` with a platform-stable floor.

    The power is evaluated with 50 significant digits.  If it lies within one
    ulp of an integer it is snapped to that integer before flooring.
    """
    with mpmath.workdps(50):
        exact = mpmath.power(mpmath.mpf(int(n)), mpmath.mpf(float(lam)))
        nearest = int(mpmath.nint(exact))
        approx = float(exact)
        if abs(exact - nearest) <= math.ulp(approx):
            return float(nearest), nearest
        return approx, int(mpmath.floor(exact))


@dataclass(frozen=True)
class SheetParams:
    n: int
    lam: float
    d: int = 2
    mode: str = THEOREM
    scale: float = field(init=False, repr=False)
    strips_per_axis: int = field(init=False)

    def __post_init__(self):
        if int(self.n) != self.n or self.n < 1:
            raise ValueError(f"n must be a positive integer, got {self.n!r}")
        if int(self.d) != self.d or self.d < 2:
            raise ValueError(f"d must be an integer >= 2, got {self.d!r}")
        if not (math.isfinite(self.lam) and self.lam > 0):
            raise ValueError(f"lambda must be positive, got {self.lam!r}")
        bound = theorem_lambda_bound(self.d)
        if self.mode == THEOREM:
            if not self.lam < bound:
                raise ValueError(
                    f"lambda={self.lam} outside theorem range (0, {bound:.6g}) for d={self.d}; "
                    "use exploratory mode"
                )
        elif self.mode == EXPLORATORY:
            if not self.lam < 1:
                raise ValueError(f"lambda must lie in (0, 1), got {self.lam!r}")
            if self.lam >= bound:
                warnings.warn(
                    f"lambda={self.lam} >= {bound:.6g}: convergence is not guaranteed",
                    OutsideTheoremWarning,
                    stacklevel=3,
                )
        else:
            raise ValueError(f"mode must be {THEOREM!r} or {EXPLORATORY!r}, got {self.mode!r}")
        scale, strips = scaled_power(self.n, self.lam)
        assert strips >= 1, "n**lambda < 1 cannot happen for n >= 1, lambda > 0"
        object.__setattr__(self, "scale", scale)
        object.__setattr__(self, "strips_per_axis", strips)

    @property
    def outside_theorem(self) -> bool:
        return self.lam >= theorem_lambda_bound(self.d)

    @property
    def strip_count(self) -> int:
        return self.strips_per_axis ** (self.d - 1)

    @property
    def amplitude(self) -> float:
        """Factor applied to nested sums of transport values, n**(-(d-1) lam / 2)."""
        return float(self.n) ** (-(self.d - 1) * self.lam / 2.0)

    def cell_coordinate(self, s: float):
        """Split ``s`` into (full cells below, fractional weight of the next cell)."""
        u = s * self.scale
        nearest = round(u)
        # grid lines k / n**lam (up to rounding of s) take the zero-weight branch
        if abs(u - nearest) <= 4 * math.ulp(max(u, 1.0)):
            j, w = nearest, 0.0
        else:
            j = math.floor(u)
            w = u - j
        if j >= self.strips_per_axis:
            return self.strips_per_axis, 0.0
        return j, w


@dataclass(frozen=True)
class SheetApproximation:
    params: SheetParams
    seed: int
    strips: dict

    def value(self, s: float, t: float) -> float:
        return sheet_value(self, s, t)

    def __call__(self, *x):
        return sheet_value_dparam(self, x)


def strip_indices(params: SheetParams):
    m = params.strips_per_axis
    return list(itertools.product(range(1, m + 1), repeat=params.d - 1))


def build_sheet(params: SheetParams, master_seed: int) -> SheetApproximation:
    strips = {}
    for k in strip_indices(params):
        strips[k] = transport_path(params.n, derive_seed(master_seed, "strip", k))
    return SheetApproximation(params, master_seed, strips)


def _check_unit(x, name):
    if not (0.0 <= x <= 1.0):
        raise ValueError(f"{name} must lie in [0, 1], got {x!r}")


def sheet_value(sheet: SheetApproximation, s: float, t: float) -> float:
    """Two-parameter field: full strips summed, plus a fractional share of the next."""
    p = sheet.params
    if p.d != 2:
        raise ValueError("sheet_value needs d = 2; use sheet_value_dparam")
    _check_unit(s, "s")
    _check_unit(t, "t")
    j, w = p.cell_coordinate(s)
    acc = 0.0
    for k in range(1, j + 1):
        acc += sheet.strips[(k,)].value(t)
    if w:
        acc += w * sheet.strips[(j + 1,)].value(t)
    return p.amplitude * acc


def _blend_weights(p: SheetParams, coords):
    """Per-axis lists of (strip index, weight) with nonzero weight."""
    axes = []
    for c in coords:
        j, w = p.cell_coordinate(c)
        ax = [(k, 1.0) for k in range(1, j + 1)]
        if w:
            ax.append((j + 1, w))
        axes.append(ax)
    return axes


def sheet_value_dparam(sheet: SheetApproximation, x) -> float:
    """Multilinear interpolation of the corner nested sums at ``x`` in [0, 1]**d.

    Interpolating cumulative sums multilinearly is the same as weighting each
    strip by the product of its per-axis weights (1 for full cells, the
    fractional part for the partial cell), which is what is summed here.
    """
    p = sheet.params
    x = tuple(float(c) for c in x)
    if len(x) != p.d:
        raise ValueError(f"point must have {p.d} coordinates, got {len(x)}")
    for i, c in enumerate(x):
        _check_unit(c, f"coordinate {i}")
    *space, t = x
    acc = 0.0
    for combo in itertools.product(*_blend_weights(p, space)):
        wt = 1.0
        for _, w in combo:
            wt *= w
        k = tuple(i for i, _ in combo)
        acc += wt * sheet.strips[k].value(t)
    return p.amplitude * acc


def sheet_values_on_grid(sheet: SheetApproximation, axes) -> np.ndarray:
    """Evaluate on a tensor grid; entry-wise bitwise equal to pointwise evaluation."""
    p = sheet.params
    axes = [np.asarray(a, dtype=float) for a in axes]
    if len(axes) != p.d:
        raise ValueError(f"grid must have {p.d} axes")
    for a in axes:
        if a.ndim != 1 or a.size == 0:
            raise ValueError("each grid axis must be a nonempty 1-d list")
        if a[0] < 0 or a[-1] > 1 or np.any(np.diff(a) < 0):
            raise ValueError("grid axes must be ascending within [0, 1]")
    tgrid = axes[-1]
    # strip values on the time axis, evaluated once per strip
    cache = {k: path.values(tgrid) for k, path in sheet.strips.items()}
    out = np.empty(tuple(a.size for a in axes))
    for idx in itertools.product(*(range(a.size) for a in axes[:-1])):
        space = [axes[i][j] for i, j in enumerate(idx)]
        acc = np.zeros(tgrid.size)
        for combo in itertools.product(*_blend_weights(p, space)):
            wt = 1.0
            for _, w in combo:
                wt *= w
            acc += wt * cache[tuple(i for i, _ in combo)]
        out[idx] = p.amplitude * acc
    return out


@dataclass(frozen=True)
class GridSpec:
    axes: tuple

    def __post_init__(self):
        axes = tuple(np.asarray(a, dtype=float) for a in self.axes)
        for a in axes:
            if a.ndim != 1 or a.size == 0:
                raise ValueError("each grid axis must be a nonempty 1-d list")
            if a[0] < 0 or a[-1] > 1 or np.any(np.diff(a) < 0):
                raise ValueError("grid axes must be ascending within [0, 1]")
        object.__setattr__(self, "axes", axes)

    @classmethod
    def uniform(cls, counts):
        """``counts[i]`` equally spaced points on [0, 1] per axis (a single point is 0)."""
        return cls(tuple(np.linspace(0.0, 1.0, c) if c > 1 else np.zeros(1) for c in counts))

    @property
    def shape(self):
        return tuple(a.size for a in self.axes)


def render_grid(sheet: SheetApproximation, grid: GridSpec, fmt: str = "csv", provenance=None) -> str:
    """The sheet on ``grid`` as CSV or JSON text."""
    from .gridio import grid_to_csv, grid_to_json

    values = sheet_values_on_grid(sheet, grid.axes)
    if fmt == "csv":
        return grid_to_csv(grid.axes, values, provenance)
    if fmt == "json":
        p = sheet.params
        params = {"n": p.n, "lambda": p.lam, "d": p.d, "seed": sheet.seed, "mode": p.mode,
                  "strips_per_axis": p.strips_per_axis}
        return grid_to_json(grid.axes, values, params, provenance)
    raise ValueError(f"format must be 'csv' or 'json', got {fmt!r}")


def export_grid(sheet: SheetApproximation, grid: GridSpec, path, fmt: str = "csv", provenance=None) -> None:
    from .gridio import write_text

    write_text(path, render_grid(sheet, grid, fmt, provenance))
