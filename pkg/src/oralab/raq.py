"""Barrier recursions for removal at a moving quantile.

Mass delta is removed per step of length delta, located by the extended cut
L^{a,delta} whose parameter a is read off the quantile curve q on the step:
q_max + Delta for the upper barrier, q_min - Delta - delta for the lower one.
Both barriers carry an error slab of mass exp(-Delta^4/2delta) * delta, on
the right of the upper barrier and on the left of the lower one.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from .errors import AdmissibilityError, BarrierDiagnostic, SandwichViolation, ValidityWindowExceeded
from .grid import TOL_ORDER, DensityGrid, cut_extended, r_left, r_right, tail_array, uniform_slab
from .kernel import apply_kernel
from .measures import RemovalMeasure
from .rab import BarrierRun, certificate_factor, n_steps_for
from .schedules import QuantileSchedule


@dataclass(frozen=True, eq=False)
class RaqData:
    u0: DensityGrid
    q: QuantileSchedule
    horizon: float

    def __post_init__(self):
        if abs(self.u0.total_mass - 1.0) > 1e-12:
            raise AdmissibilityError(f"u0 must have mass 1, got {self.u0.total_mass!r}")
        if not 0 < self.horizon < 1:
            raise AdmissibilityError("horizon must lie in (0, 1)")
        try:
            self.q.validate()
        except ValueError as exc:
            raise AdmissibilityError(str(exc)) from exc

    @property
    def grid(self):
        return self.u0.grid

    def reflected(self) -> "RaqData":
        """Data (u0(-x), 1 - t - q) of the mirror-image problem."""
        return RaqData(self.u0.reflected(), self.q.reflected(), self.horizon)


def q_bounds(data: RaqData, n: int, delta: float) -> tuple[float, float]:
    """(min, max) of q over the step interval [(n-1) delta, n delta]."""
    if n * delta > 1 + 1e-12:
        raise ValidityWindowExceeded("q bounds are only defined up to t = 1")
    return data.q.bounds((n - 1) * delta, n * delta)


def _window(n: int, Delta: float, delta: float) -> None:
    if not n * delta < 1 - Delta:
        raise ValidityWindowExceeded(f"step {n}: n*delta={n * delta:.6g} must stay below 1 - Delta")


def upper_step_raq(u_prev: DensityGrid, n: int, data: RaqData, Delta: float, delta: float,
                   bounds: tuple[float, float] | None = None) -> tuple[DensityGrid, DensityGrid]:
    _window(n, Delta, delta)
    q_plus = (bounds or q_bounds(data, n, delta))[1]
    w = apply_kernel(u_prev, delta)
    sigma = r_right(w, Delta)
    pair = cut_extended(w, q_plus + Delta, delta)
    err = uniform_slab(w.grid, sigma, certificate_factor(Delta, delta) * delta)
    return pair.kept + err, pair.removed


def lower_step_raq(u_prev: DensityGrid, n: int, data: RaqData, Delta: float, delta: float,
                   bounds: tuple[float, float] | None = None) -> tuple[DensityGrid, DensityGrid]:
    _window(n, Delta, delta)
    q_minus = (bounds or q_bounds(data, n, delta))[0]
    w = apply_kernel(u_prev, delta)
    sigma = r_left(w, Delta)
    pair = cut_extended(w, q_minus - Delta - delta, delta)
    err = uniform_slab(w.grid, sigma - 1.0, certificate_factor(Delta, delta) * delta)
    return pair.kept + err, pair.removed


def gap_bound_raq(Delta: float, delta: float, n) -> np.ndarray:
    e = certificate_factor(Delta, delta)
    return 3 * Delta + e * delta * np.asarray(n, dtype=float) + e


def certificate_window(Delta: float, delta: float) -> float:
    """Time below which the separation bound is claimed: 1 - 3 Delta - exp(-Delta^4/2delta)."""
    return 1 - 3 * Delta - certificate_factor(Delta, delta)


def solve_raq(data: RaqData, Delta: float, delta: float, stride: int = 1,
              check: bool = True) -> BarrierRun:
    if not 0 < delta < Delta:
        raise ValueError("need 0 < delta < Delta")
    n_steps = n_steps_for(data.horizon, delta)
    _window(n_steps, Delta, delta)
    steps_all = np.arange(n_steps + 1)
    gap = gap_bound_raq(Delta, delta, steps_all)
    certified = delta * steps_all < certificate_window(Delta, delta)
    lower = upper = data.u0
    snaps_lo, snaps_up, steps = [lower], [upper], [0]
    rem_lo, rem_up = RemovalMeasure(), RemovalMeasure()
    measured = np.zeros(n_steps + 1)
    m_lo = np.zeros(n_steps + 1)
    m_up = np.zeros(n_steps + 1)
    m_lo[0] = m_up[0] = data.u0.total_mass
    c_inf = data.u0.sup_norm()
    blem2_misses = 0
    uncertified_violations = 0
    for n in range(1, n_steps + 1):
        b = q_bounds(data, n, delta)
        prev_upper = upper
        lower, slab_lo = lower_step_raq(lower, n, data, Delta, delta, b)
        upper, slab_up = upper_step_raq(upper, n, data, Delta, delta, b)
        t = n * delta
        rem_lo.add(t, slab_lo)
        rem_up.add(t, slab_up)
        m_lo[n] = lower.total_mass
        m_up[n] = upper.total_mass
        measured[n] = float(np.max(tail_array(upper.values, upper.grid.h) - tail_array(lower.values, lower.grid.h)))
        if measured[n] - gap[n] > TOL_ORDER * max(m_lo[n], m_up[n]):
            if check and certified[n]:
                raise SandwichViolation(n, measured[n] - gap[n])
            uncertified_violations += 1
        c_inf = max(c_inf, upper.sup_norm(), lower.sup_norm())
        level = b[1] + c_inf * math.sqrt(delta)
        supp = rem_up.payloads[-1].support()
        if supp is not None and level < prev_upper.total_mass:
            if supp[0] < r_right(prev_upper, level) - 8 * math.sqrt(delta):
                blem2_misses += 1
        if n % stride == 0 or n == n_steps:
            snaps_lo.append(lower)
            snaps_up.append(upper)
            steps.append(n)
    if blem2_misses:
        warnings.warn(f"{blem2_misses} upper removal slabs reached left of the quantile support bound",
                      BarrierDiagnostic, stacklevel=2)
    return BarrierRun(data, Delta, delta, np.array(steps), snaps_lo, snaps_up, rem_lo, rem_up,
                      gap, measured, m_lo, m_up, certified=certified,
                      diagnostics={"support_bound_misses": blem2_misses, "c_inf": c_inf,
                                   "uncertified_violations": uncertified_violations})


def expected_mass_raq(Delta: float, delta: float, n: int) -> float:
    return 1 - n * delta + n * certificate_factor(Delta, delta) * delta


def solution_after_extinction(grid) -> DensityGrid:
    """For t >= 1 the solution is identically zero."""
    return grid.zeros()
