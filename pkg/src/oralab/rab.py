"""Lower and upper barrier recursions for removal at the boundary.

Each step diffuses the previous iterate for one time step, adds the mass
injected during the step, and cuts the mass removed during the step. The
lower barrier cuts the rightmost mass; the upper barrier cuts just left of the
Delta-right-quantile and adds a small uniform error slab. Together they give a
two-sided certificate: upper <= lower (mod gap_bound) at every step.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from .errors import (AdmissibilityError, BarrierDiagnostic, DeltaTooLarge, InfeasibleCut,
                     SandwichViolation)
from .grid import (TOL_ORDER, DensityGrid, cut_interior, cut_right, order_excess, r_right,
                   tail_array, uniform_slab)
from .kernel import TRUNCATION, InjectionSchedule, apply_kernel, inject
from .measures import RemovalMeasure
from .schedules import CumulativeSchedule, epsilon0


def certificate_factor(Delta: float, delta: float) -> float:
    """exp(-Delta^4 / (2 delta)), the weight of the upper barrier's error slab."""
    return math.exp(-Delta ** 4 / (2.0 * delta))


def default_delta(Delta: float) -> float:
    """Default time step Delta^5, capped to [1e-7, 1e-3]."""
    return min(max(Delta ** 5, 1e-7), 1e-3)


def n_steps_for(horizon: float, delta: float) -> int:
    return int(math.floor(horizon / delta + 1e-9))


@dataclass(frozen=True, eq=False)
class RabData:
    u0: DensityGrid
    injection: InjectionSchedule
    J: CumulativeSchedule
    horizon: float

    def __post_init__(self):
        if abs(self.u0.total_mass - 1.0) > 1e-12:
            raise AdmissibilityError(f"u0 must have mass 1, got {self.u0.total_mass!r}")
        if self.injection.density is not None and self.injection.density.grid != self.u0.grid:
            raise AdmissibilityError("injection density must share the grid of u0")
        if not self.horizon > 0:
            raise AdmissibilityError("horizon must be positive")
        if not self.epsilon0 > 0:
            raise AdmissibilityError(f"inf(1 + I - J) = {self.epsilon0:.4g} must be positive")

    @property
    def I(self) -> CumulativeSchedule:
        return self.injection.I

    @property
    def grid(self):
        return self.u0.grid

    @property
    def epsilon0(self) -> float:
        return epsilon0(self.I, self.J, self.horizon)

    def removal_increment(self, n: int, delta: float) -> float:
        return float(self.J(n * delta) - self.J((n - 1) * delta))


def _pre_cut(u_prev: DensityGrid, n: int, data: RabData, delta: float, cache: dict | None):
    w = apply_kernel(u_prev, delta)
    if not data.I.is_zero:
        w = inject(w, data.injection, (n - 1) * delta, n * delta, cache=cache)
    return w


def lower_step(u_prev: DensityGrid, n: int, data: RabData, delta: float,
               cache: dict | None = None) -> tuple[DensityGrid, DensityGrid]:
    """One lower-barrier step: rightmost cut of the step's removal mass."""
    w = _pre_cut(u_prev, n, data, delta, cache)
    j = data.removal_increment(n, delta)
    if j <= 0:
        return w, w.grid.zeros()
    if not w.total_mass > j:
        raise InfeasibleCut(f"step {n}: mass {w.total_mass:.6g} cannot cover removal {j:.6g}")
    pair = cut_right(w, j)
    return pair.kept, pair.removed


def upper_step(u_prev: DensityGrid, n: int, data: RabData, Delta: float, delta: float,
               cache: dict | None = None, eps0: float | None = None) -> tuple[DensityGrid, DensityGrid]:
    """One upper-barrier step: interior cut leaving Delta mass to its right, plus
    the error slab exp(-Delta^4/2delta) * j on [sigma, sigma + 1]."""
    eps0 = data.epsilon0 if eps0 is None else eps0
    if Delta >= eps0:
        raise DeltaTooLarge(f"Delta={Delta} must be below epsilon0={eps0:.4g}")
    w = _pre_cut(u_prev, n, data, delta, cache)
    j = data.removal_increment(n, delta)
    if j <= 0:
        return w, w.grid.zeros()
    if not w.total_mass > Delta + j:
        raise InfeasibleCut(f"step {n}: mass {w.total_mass:.6g} cannot cover Delta + removal")
    sigma = r_right(w, Delta)
    pair = cut_interior(w, Delta, j)
    err = uniform_slab(w.grid, sigma, certificate_factor(Delta, delta) * j)
    return pair.kept + err, pair.removed


@dataclass(eq=False)
class BarrierRun:
    data: object
    Delta: float
    delta: float
    steps: np.ndarray
    lower: list
    upper: list
    removal_lower: RemovalMeasure
    removal_upper: RemovalMeasure
    gap_bound: np.ndarray          # per step 0..n_steps
    measured_gap: np.ndarray       # sup_r (upper tail - lower tail), per step
    lower_mass: np.ndarray
    upper_mass: np.ndarray
    certified: np.ndarray | None = None
    diagnostics: dict = field(default_factory=dict)

    @property
    def n_steps(self) -> int:
        return self.gap_bound.size - 1

    @property
    def step_times(self) -> np.ndarray:
        return self.delta * np.arange(self.n_steps + 1)

    @property
    def times(self) -> np.ndarray:
        return self.delta * self.steps

    def index_at(self, t: float) -> int:
        """Position in the snapshot lists of the recorded step closest to t."""
        n = int(round(t / self.delta))
        hits = np.nonzero(self.steps == n)[0]
        if hits.size == 0:
            raise KeyError(f"no recorded step at t={t}")
        return int(hits[0])

    def lower_at(self, t: float) -> DensityGrid:
        return self.lower[self.index_at(t)]

    def upper_at(self, t: float) -> DensityGrid:
        return self.upper[self.index_at(t)]

    def mid_at(self, t: float) -> DensityGrid:
        k = self.index_at(t)
        return DensityGrid(self.lower[k].grid, 0.5 * (self.lower[k].values + self.upper[k].values))

    @property
    def mid(self) -> list:
        return [DensityGrid(lo.grid, 0.5 * (lo.values + up.values)) for lo, up in zip(self.lower, self.upper)]

    @property
    def mid_removal(self) -> RemovalMeasure:
        """Average of the two branches' removal records (pairs with ``mid``)."""
        out = RemovalMeasure()
        for t, a, b in zip(self.removal_lower.times, self.removal_lower.payloads, self.removal_upper.payloads):
            out.add(t, a.density.scaled(0.5) + b.density.scaled(0.5))
        return out

    def pre_removal_lower(self) -> list:
        """Lower iterate before its cut at each recorded step (kept + removed slab)."""
        if not np.array_equal(self.steps, np.arange(self.n_steps + 1)):
            raise ValueError("pre-removal states need every step recorded (stride 1)")
        out = [self.lower[0]]
        for k in range(1, self.n_steps + 1):
            out.append(self.lower[k] + self.removal_lower.payloads[k - 1].density)
        return out


def _gap_excess(upper: DensityGrid, lower: DensityGrid) -> float:
    return float(np.max(tail_array(upper.values, upper.grid.h) - tail_array(lower.values, lower.grid.h)))


def solve(data: RabData, Delta: float, delta: float | None = None, stride: int = 1,
          check: bool = True, ora_grid=None) -> BarrierRun:
    """Run both barrier recursions to floor(horizon / delta) steps.

    With ``ora_grid`` the lower branch's absorption integral (pre-removal tail
    at r against removal left of r) is accumulated on the fly and stored in
    ``diagnostics["ora_per_r"]``, so no stride-1 history is needed.
    """
    if delta is None:
        delta = default_delta(Delta)
    if not (Delta > 0 and delta > 0):
        raise ValueError("Delta and delta must be positive")
    eps0 = data.epsilon0
    if Delta >= eps0:
        raise DeltaTooLarge(f"Delta={Delta} must be below epsilon0={eps0:.4g}")
    n_steps = n_steps_for(data.horizon, delta)
    factor = certificate_factor(Delta, delta)
    t_all = delta * np.arange(n_steps + 1)
    J_all = np.asarray(data.J(t_all), dtype=float)
    gap = Delta + factor * J_all
    lower = upper = data.u0
    snaps_lo, snaps_up, steps = [lower], [upper], [0]
    rem_lo, rem_up = RemovalMeasure(), RemovalMeasure()
    measured = np.zeros(n_steps + 1)
    m_lo = np.zeros(n_steps + 1)
    m_up = np.zeros(n_steps + 1)
    m_lo[0] = m_up[0] = data.u0.total_mass
    cache: dict = {}
    lem2_misses = 0
    r_ora = None if ora_grid is None else np.asarray(ora_grid, dtype=float)
    ora = None if r_ora is None else np.zeros(r_ora.size)
    for n in range(1, n_steps + 1):
        prev_lower = lower
        lower, slab_lo = lower_step(lower, n, data, delta, cache)
        upper, slab_up = upper_step(upper, n, data, Delta, delta, cache, eps0)
        t = n * delta
        rem_lo.add(t, slab_lo)
        rem_up.add(t, slab_up)
        if ora is not None:
            pre = tail_array(lower.values + slab_lo.values, data.grid.h)
            ora += np.interp(r_ora, data.grid.edges, pre) * rem_lo.payloads[-1].left_mass(r_ora)
        m_lo[n] = lower.total_mass
        m_up[n] = upper.total_mass
        measured[n] = _gap_excess(upper, lower)
        if check:
            tol = TOL_ORDER * max(m_lo[n], m_up[n])
            excess = measured[n] - gap[n]
            if excess > tol:
                raise SandwichViolation(n, excess)
        j = J_all[n] - J_all[n - 1]
        if j > 0 and prev_lower.total_mass > 3 * j:
            supp = rem_lo.payloads[-1].support()
            if supp is not None and supp[0] < r_right(prev_lower, 3 * j) - TRUNCATION * math.sqrt(delta):
                lem2_misses += 1
        if n % stride == 0 or n == n_steps:
            snaps_lo.append(lower)
            snaps_up.append(upper)
            steps.append(n)
    measured[0] = _gap_excess(data.u0, data.u0)
    if lem2_misses:
        warnings.warn(f"{lem2_misses} removal slabs reached left of the 3j-quantile bound",
                      BarrierDiagnostic, stacklevel=2)
    return BarrierRun(data, Delta, delta, np.array(steps), snaps_lo, snaps_up, rem_lo, rem_up,
                      gap, measured, m_lo, m_up,
                      diagnostics={"support_bound_misses": lem2_misses, "ora_grid": r_ora, "ora_per_r": ora})


def lower_only(data: RabData, delta: float, stride: int = 1) -> tuple[np.ndarray, list, RemovalMeasure]:
    """Lower recursion alone (cheaper; used for comparison-principle checks)."""
    n_steps = n_steps_for(data.horizon, delta)
    u = data.u0
    out, steps, rem = [u], [0], RemovalMeasure()
    cache: dict = {}
    for n in range(1, n_steps + 1):
        u, slab = lower_step(u, n, data, delta, cache)
        rem.add(n * delta, slab)
        if n % stride == 0 or n == n_steps:
            out.append(u)
            steps.append(n)
    return np.array(steps), out, rem


def expected_lower_mass(data: RabData, delta: float, n: int) -> float:
    t = n * delta
    return 1.0 + float(data.I(t)) - float(data.J(t))


def expected_upper_mass(data: RabData, Delta: float, delta: float, n: int) -> float:
    t = n * delta
    return 1.0 + float(data.I(t)) - float(data.J(t)) + certificate_factor(Delta, delta) * float(data.J(t))


def dominance_excess(a: list, b: list) -> float:
    """max over paired iterates of order_excess(a_k, b_k)."""
    return max(order_excess(x, y) for x, y in zip(a, b))
