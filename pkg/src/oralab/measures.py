"""Atomic measures, sparse grid slabs, and time-stamped removal records."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Union

import numpy as np

from .grid import DensityGrid, Grid, head_array


@dataclass(frozen=True, eq=False)
class AtomList:
    locations: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        x = np.atleast_1d(np.asarray(self.locations, dtype=float))
        w = np.atleast_1d(np.asarray(self.weights, dtype=float))
        if x.shape != w.shape:
            raise ValueError("locations and weights must have equal length")
        if np.any(w < 0) or not np.all(np.isfinite(w)) or not np.all(np.isfinite(x)):
            raise ValueError("atom weights must be finite and nonnegative")
        object.__setattr__(self, "locations", x)
        object.__setattr__(self, "weights", w)

    @classmethod
    def point(cls, x: float, weight: float = 1.0) -> "AtomList":
        return cls(np.array([x]), np.array([weight]))

    @classmethod
    def from_pairs(cls, pairs: Iterable) -> "AtomList":
        pairs = list(pairs)
        if not pairs:
            return cls(np.zeros(0), np.zeros(0))
        x, w = zip(*pairs)
        return cls(np.array(x, float), np.array(w, float))

    @property
    def total_mass(self) -> float:
        return float(self.weights.sum())

    def __len__(self) -> int:
        return self.locations.size

    def reflected(self) -> "AtomList":
        return AtomList(-self.locations, self.weights.copy())

    def tail(self, r):
        """Mass on [r, inf)."""
        r = np.asarray(r, dtype=float)
        order = np.argsort(self.locations)
        xs = self.locations[order]
        cw = np.concatenate([[0.0], np.cumsum(self.weights[order])])
        idx = np.searchsorted(xs, r, side="left")
        return cw[-1] - cw[idx]

    def left_mass(self, r):
        """Mass on (-inf, r)."""
        return self.total_mass - self.tail(r)

    def support(self) -> tuple[float, float] | None:
        x = self.locations[self.weights > 0]
        if x.size == 0:
            return None
        return float(x.min()), float(x.max())


@dataclass(frozen=True, eq=False)
class Slab:
    """A density on a grid that is zero outside cells [offset, offset + len(values))."""

    grid: Grid
    offset: int
    values: np.ndarray

    @classmethod
    def from_density(cls, u: DensityGrid) -> "Slab":
        nz = np.nonzero(u.values > 0)[0]
        if nz.size == 0:
            return cls(u.grid, 0, np.zeros(0))
        lo, hi = int(nz[0]), int(nz[-1]) + 1
        return cls(u.grid, lo, u.values[lo:hi].copy())

    @property
    def density(self) -> DensityGrid:
        v = np.zeros(self.grid.n_cells)
        v[self.offset:self.offset + self.values.size] = self.values
        return DensityGrid(self.grid, v)

    @property
    def total_mass(self) -> float:
        return float(self.grid.h * self.values.sum())

    def _edges(self) -> np.ndarray:
        return self.grid.x_min + self.grid.h * (self.offset + np.arange(self.values.size + 1))

    def left_mass(self, r):
        """Mass on (-inf, r); exact for the piecewise-constant density."""
        if self.values.size == 0:
            return np.zeros_like(np.asarray(r, dtype=float))
        return np.interp(r, self._edges(), head_array(self.values, self.grid.h))

    def tail(self, r):
        return self.total_mass - self.left_mass(r)

    def support(self) -> tuple[float, float] | None:
        if self.values.size == 0:
            return None
        e = self._edges()
        return float(e[0]), float(e[-1])


Payload = Union[Slab, AtomList]


@dataclass(eq=False)
class RemovalMeasure:
    """Time-stamped removed mass: grid slabs from solvers or atoms from simulators."""

    times: list = field(default_factory=list)
    payloads: list = field(default_factory=list)

    def add(self, time: float, payload) -> None:
        if isinstance(payload, DensityGrid):
            payload = Slab.from_density(payload)
        if self.times and time < self.times[-1]:
            raise ValueError("removal times must be nondecreasing")
        self.times.append(float(time))
        self.payloads.append(payload)

    def __len__(self) -> int:
        return len(self.times)

    def masses(self) -> np.ndarray:
        return np.array([p.total_mass for p in self.payloads])

    def cumulative_mass(self, t) -> float:
        """Total removed mass over [0, t]."""
        if not self.times:
            return 0.0
        k = int(np.searchsorted(np.asarray(self.times), t, side="right"))
        return float(self.masses()[:k].sum())

    def left_mass_matrix(self, r_grid) -> np.ndarray:
        """Entry-by-r matrix of removed mass on (-inf, r)."""
        r = np.asarray(r_grid, dtype=float)
        if not self.payloads:
            return np.zeros((0, r.size))
        return np.vstack([np.asarray(p.left_mass(r), dtype=float) for p in self.payloads])

    def window(self, t1: float, t2: float) -> list:
        return [p for t, p in zip(self.times, self.payloads) if t1 <= t <= t2]

    def reflected(self) -> "RemovalMeasure":
        out = RemovalMeasure()
        for t, p in zip(self.times, self.payloads):
            if isinstance(p, AtomList):
                out.add(t, p.reflected())
            else:
                out.add(t, Slab(p.grid.reflected(), p.grid.n_cells - p.offset - p.values.size, p.values[::-1].copy()))
        return out
