"""Distances between measures on the line, given through their right tails.

A "tail-evaluable" is any callable r -> mass on [r, inf) that also exposes
``total_mass``: grid tails, empirical tails, or plain closures wrapped in
:class:`Tail`.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np


@dataclass(frozen=True)
class Tail:
    func: Callable
    total_mass: float

    def __call__(self, r):
        return self.func(r)


def jump_aware_grid(*tails, extra=None) -> np.ndarray:
    """Evaluation points at which the sup of a tail difference is attained:
    grid edges, particle positions and the points just right of them."""
    pts = [] if extra is None else [np.asarray(extra, dtype=float)]
    for t in tails:
        if hasattr(t, "grid"):
            pts.append(t.grid.edges)
        if hasattr(t, "positions"):
            x = t.positions
            pts.extend([x, np.nextafter(x, np.inf)])
    if not pts:
        raise ValueError("no evaluation points; pass r_grid")
    return np.unique(np.concatenate(pts))


def tail_sup_distance(a, b, r_grid=None) -> float:
    """sup over r of |a[r, inf) - b[r, inf)|."""
    r = jump_aware_grid(a, b) if r_grid is None else np.asarray(r_grid, dtype=float)
    return float(np.max(np.abs(np.asarray(a(r)) - np.asarray(b(r)))))


def _cdf(t):
    return lambda x: t.total_mass - np.asarray(t(x), dtype=float)


def _within(Fa, Fb, x, eps) -> bool:
    fb = Fb(x)
    return bool(np.all(Fa(x - eps) - eps <= fb + 1e-15) and np.all(fb <= Fa(x + eps) + eps + 1e-15))


def levy_distance(a, b, x_grid=None, resolution: float | None = None) -> float:
    """Levy distance between the cumulative functions F(x) = mass on (-inf, x).

    The smallest eps with F_a(x - eps) - eps <= F_b(x) <= F_a(x + eps) + eps on
    the evaluation grid, found by bisection to the given resolution.
    """
    x = jump_aware_grid(a, b) if x_grid is None else np.asarray(x_grid, dtype=float)
    if resolution is None:
        resolution = 1e-9
    Fa, Fb = _cdf(a), _cdf(b)
    lo, hi = 0.0, max(a.total_mass, b.total_mass) + float(x[-1] - x[0]) + 1.0
    if _within(Fa, Fb, x, 0.0):
        return 0.0
    while hi - lo > resolution:
        mid = 0.5 * (lo + hi)
        if _within(Fa, Fb, x, mid):
            hi = mid
        else:
            lo = mid
    return hi
