"""Piecewise-constant densities on a shared uniform grid, the mass-transport
order, and the cutting operators.

Every density is constant on cells, so its right tail r -> u[r, inf) is
piecewise linear with breakpoints at the cell edges. Order checks between two
densities on the same grid are therefore decided exactly at the edges.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import GridMismatch, InsufficientMass

TOL_ORDER = 1e-12


@dataclass(frozen=True)
class Grid:
    x_min: float
    x_max: float
    n_cells: int

    def __post_init__(self):
        if not self.x_min < self.x_max:
            raise ValueError("need x_min < x_max")
        if int(self.n_cells) != self.n_cells or self.n_cells < 1:
            raise ValueError("n_cells must be a positive integer")

    @property
    def h(self) -> float:
        return (self.x_max - self.x_min) / self.n_cells

    @property
    def edges(self) -> np.ndarray:
        return self.x_min + self.h * np.arange(self.n_cells + 1)

    @property
    def centers(self) -> np.ndarray:
        return self.x_min + self.h * (np.arange(self.n_cells) + 0.5)

    def reflected(self) -> "Grid":
        return Grid(-self.x_max, -self.x_min, self.n_cells)

    @property
    def symmetric(self) -> bool:
        return self.x_min == -self.x_max

    def cell_of(self, x: float) -> int:
        """Index of the cell containing x, clamped to the grid."""
        k = int(np.floor((x - self.x_min) / self.h))
        return min(max(k, 0), self.n_cells - 1)

    def zeros(self) -> "DensityGrid":
        return DensityGrid(self, np.zeros(self.n_cells))

    def from_function(self, f) -> "DensityGrid":
        return DensityGrid(self, np.asarray(f(self.centers), dtype=float))

    def indicator(self, a: float, b: float, height: float = 1.0) -> "DensityGrid":
        """height * 1_[a,b], with exact fractional cell coverage."""
        return DensityGrid(self, height * self.overlap(a, b) / self.h)

    def overlap(self, a: float, b: float) -> np.ndarray:
        """Length of [a, b] inside each cell."""
        e = self.edges
        return np.clip(np.minimum(e[1:], b) - np.maximum(e[:-1], a), 0.0, None)


@dataclass(frozen=True, eq=False)
class DensityGrid:
    grid: Grid
    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.shape != (self.grid.n_cells,):
            raise ValueError(f"expected {self.grid.n_cells} cell values, got {v.shape}")
        if np.any(v < 0) or not np.all(np.isfinite(v)):
            raise ValueError("density values must be finite and nonnegative")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    @property
    def masses(self) -> np.ndarray:
        return self.grid.h * self.values

    @property
    def total_mass(self) -> float:
        return float(self.grid.h * self.values.sum())

    def tail(self) -> "TailFunction":
        return tail_of(self)

    def _check(self, other: "DensityGrid") -> None:
        if other.grid != self.grid:
            raise GridMismatch("densities live on different grids")

    def __add__(self, other: "DensityGrid") -> "DensityGrid":
        self._check(other)
        return DensityGrid(self.grid, self.values + other.values)

    def __sub__(self, other: "DensityGrid") -> "DensityGrid":
        """Cellwise difference; tiny negative rounding residue is clipped."""
        self._check(other)
        d = self.values - other.values
        if np.any(d < -1e-9 * max(1.0, float(self.values.max(initial=0.0)))):
            raise ValueError("difference would be negative")
        return DensityGrid(self.grid, np.clip(d, 0.0, None))

    def scaled(self, c: float) -> "DensityGrid":
        return DensityGrid(self.grid, c * self.values)

    def reflected(self) -> "DensityGrid":
        """u(-x) on the reflected grid."""
        return DensityGrid(self.grid.reflected(), self.values[::-1].copy())

    def sup_norm(self) -> float:
        return float(self.values.max(initial=0.0))

    def allclose(self, other: "DensityGrid", atol: float = 0.0) -> bool:
        return other.grid == self.grid and bool(np.all(np.abs(self.values - other.values) <= atol))

    def support(self) -> tuple[float, float] | None:
        nz = np.nonzero(self.values > 0)[0]
        if nz.size == 0:
            return None
        e = self.grid.edges
        return float(e[nz[0]]), float(e[nz[-1] + 1])


def tail_array(values: np.ndarray, h: float) -> np.ndarray:
    """tail[k] = h * sum_{i >= k} values[i], length n + 1, tail[n] = 0."""
    out = np.zeros(values.size + 1)
    out[:-1] = h * np.cumsum(values[::-1])[::-1]
    return out


def head_array(values: np.ndarray, h: float) -> np.ndarray:
    """head[k] = h * sum_{i < k} values[i], length n + 1, head[0] = 0."""
    out = np.zeros(values.size + 1)
    out[1:] = h * np.cumsum(values)
    return out


@dataclass(frozen=True, eq=False)
class TailFunction:
    grid: Grid
    tail: np.ndarray

    @property
    def total_mass(self) -> float:
        return float(self.tail[0])

    def __call__(self, r):
        """Mass on [r, inf); linear between edges, constant outside the grid."""
        return np.interp(r, self.grid.edges, self.tail)


def tail_of(u: DensityGrid) -> TailFunction:
    t = tail_array(u.values, u.grid.h)
    t.setflags(write=False)
    return TailFunction(u.grid, t)


def order_excess(u: DensityGrid, v: DensityGrid, m: float = 0.0) -> float:
    """max_k (tail_u[k] - tail_v[k] - m); <= 0 means u is below v mod m."""
    u._check(v)
    tu = tail_array(u.values, u.grid.h)
    tv = tail_array(v.values, v.grid.h)
    return float(np.max(tu - tv)) - m


def leq(u: DensityGrid, v: DensityGrid, m: float = 0.0, rtol: float = TOL_ORDER) -> bool:
    """Mass-transport order u <= v modulo m: u[r, inf) <= v[r, inf) + m for all r."""
    if m < 0:
        raise ValueError("slack must be nonnegative")
    tol = rtol * max(u.total_mass, v.total_mass, 1e-300)
    return order_excess(u, v, m) <= tol


@dataclass(frozen=True, eq=False)
class CutPair:
    kept: DensityGrid
    removed: DensityGrid
    position: float  # the quantile where the cut sits (inner edge for interior cuts)


def _need(u: DensityGrid, amount: float) -> None:
    if not u.total_mass > amount:
        raise InsufficientMass(f"mass {u.total_mass:.6g} does not exceed {amount:.6g}")


def _right_split(values: np.ndarray, h: float, delta: float):
    """Cell index c, interpolated R_delta and removed mass inside cell c."""
    tail = tail_array(values, h)
    # last k with tail[k] >= delta (tail is nonincreasing)
    k = int(np.searchsorted(-tail, -delta, side="right")) - 1
    k = min(k, values.size - 1)
    inner = tail[k + 1]
    span = tail[k] - inner
    r = k + (tail[k] - delta) / span if span > 0 else float(k)
    return k, r, delta - inner


def _left_split(values: np.ndarray, h: float, delta: float):
    head = head_array(values, h)
    # first k with head[k] >= delta
    k = int(np.searchsorted(head, delta, side="left"))
    c = max(k - 1, 0)
    inner = head[c]
    span = head[c + 1] - inner
    r = c + (delta - inner) / span if span > 0 else float(c + 1)
    return c, r, delta - inner


def r_right(u: DensityGrid, delta: float) -> float:
    """R_delta(u) = sup{x : u[x, inf) >= delta}."""
    if delta <= 0:
        raise ValueError("delta must be positive")
    _need(u, delta)
    _, r, _ = _right_split(u.values, u.grid.h, delta)
    return u.grid.x_min + u.grid.h * r


def r_left(u: DensityGrid, delta: float) -> float:
    """inf{x : u(-inf, x] >= delta}."""
    if delta <= 0:
        raise ValueError("delta must be positive")
    _need(u, delta)
    _, r, _ = _left_split(u.values, u.grid.h, delta)
    return u.grid.x_min + u.grid.h * r


def _removed_right(values: np.ndarray, h: float, delta: float):
    c, r, part = _right_split(values, h, delta)
    removed = np.zeros_like(values)
    removed[c + 1:] = values[c + 1:]
    removed[c] = min(max(part / h, 0.0), values[c])
    return removed, r


def cut_right(u: DensityGrid, delta: float) -> CutPair:
    """Remove the rightmost mass of size delta (K^delta and its complement)."""
    g = u.grid
    if delta == 0:
        return CutPair(u, g.zeros(), g.x_max)
    _need(u, delta)
    removed, r = _removed_right(u.values, g.h, delta)
    kept = np.clip(u.values - removed, 0.0, None)
    return CutPair(DensityGrid(g, kept), DensityGrid(g, removed), g.x_min + g.h * r)


def cut_left(u: DensityGrid, delta: float) -> CutPair:
    """Remove the leftmost mass of size delta."""
    g = u.grid
    if delta == 0:
        return CutPair(u, g.zeros(), g.x_min)
    _need(u, delta)
    c, r, part = _left_split(u.values, g.h, delta)
    removed = np.zeros_like(u.values)
    removed[:c] = u.values[:c]
    removed[c] = min(max(part / g.h, 0.0), u.values[c])
    kept = np.clip(u.values - removed, 0.0, None)
    return CutPair(DensityGrid(g, kept), DensityGrid(g, removed), g.x_min + g.h * r)


def cut_interior(u: DensityGrid, Delta: float, delta: float) -> CutPair:
    """Remove the mass delta lying between the (Delta+delta)- and Delta-right-quantiles."""
    g = u.grid
    if Delta <= 0:
        raise ValueError("Delta must be positive")
    if delta == 0:
        return CutPair(u, g.zeros(), r_right(u, Delta))
    _need(u, Delta + delta)
    outer, _ = _removed_right(u.values, g.h, Delta + delta)
    inner, r = _removed_right(u.values, g.h, Delta)
    removed = np.clip(outer - inner, 0.0, None)
    kept = np.clip(u.values - removed, 0.0, None)
    return CutPair(DensityGrid(g, kept), DensityGrid(g, removed), g.x_min + g.h * r)


def cut_extended(u: DensityGrid, Delta: float, delta: float) -> CutPair:
    """L^{Delta,delta}: rightmost cut for Delta <= 0, leftmost cut once Delta + delta
    reaches the total mass, interior cut in between."""
    if delta <= 0:
        raise ValueError("delta must be positive")
    _need(u, delta)
    if Delta <= 0:
        return cut_right(u, delta)
    if Delta + delta < u.total_mass:
        return cut_interior(u, Delta, delta)
    return cut_left(u, delta)


def uniform_slab(grid: Grid, a: float, mass: float, length: float = 1.0) -> DensityGrid:
    """Uniform density of the given total mass on [a, a + length].

    Any part of the interval outside the grid is folded into the nearest
    boundary cell so the slab's mass is exact.
    """
    if mass == 0:
        return grid.zeros()
    height = mass / length
    cover = grid.overlap(a, a + length)
    v = height * cover / grid.h
    below = max(0.0, min(a + length, grid.x_min) - a)
    above = max(0.0, a + length - max(a, grid.x_max))
    v[0] += height * below / grid.h
    v[-1] += height * above / grid.h
    return DensityGrid(grid, v)
