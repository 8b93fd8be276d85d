"""Checks of how well a computed pair (u, beta) satisfies the absorption problem.

All checkers return numbers; thresholds belong to the caller.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import EmptyWindow, SupportEscapesGrid
from .grid import DensityGrid, tail_array
from .kernel import InjectionSchedule
from .measures import AtomList, RemovalMeasure, Slab


# ---------------------------------------------------------------- tail series

@dataclass(frozen=True, eq=False)
class TailSeries:
    """Tails u([r, inf), t_k) on a fixed r grid, aligned with removal entries.

    ``tails[k]`` is the state paired with removal entry k (normally the
    pre-removal state), ``totals[k]`` its total mass.
    """

    times: np.ndarray
    r_grid: np.ndarray
    tails: np.ndarray
    totals: np.ndarray


def _tails_at(u: DensityGrid, r: np.ndarray) -> np.ndarray:
    return np.interp(r, u.grid.edges, tail_array(u.values, u.grid.h))


def series_from_densities(densities, times, r_grid) -> TailSeries:
    r = np.asarray(r_grid, dtype=float)
    tails = np.array([_tails_at(u, r) for u in densities])
    totals = np.array([u.total_mass for u in densities])
    return TailSeries(np.asarray(times, float), r, tails.reshape(len(densities), r.size), totals)


def series_from_run(run, r_grid, branch: str = "lower") -> TailSeries:
    """Pre-removal states of a barrier run (needs every step recorded)."""
    if branch != "lower":
        raise ValueError("only the lower branch has a pre-removal state")
    pre = run.pre_removal_lower()[1:]
    return series_from_densities(pre, run.removal_lower.times, r_grid)


def series_from_trace(trace, which: str = "pre") -> TailSeries:
    if trace.pre_tails is None:
        raise ValueError("trace was recorded without an r_grid")
    k = np.arange(trace.n_removals)
    inj = np.searchsorted(trace.injection_times, trace.removal_times, side="right")
    before = (trace.N + inj - k) / trace.N
    if which == "pre":
        return TailSeries(trace.removal_times, trace.r_grid, trace.pre_tails, before)
    if which == "post":
        return TailSeries(trace.removal_times, trace.r_grid, trace.post_tails(), before - 1.0 / trace.N)
    raise ValueError("which must be 'pre' or 'post'")


def _left_masses(beta: RemovalMeasure, r: np.ndarray) -> np.ndarray:
    if len(beta) == 0:
        return np.zeros((0, r.size))
    return beta.left_mass_matrix(r)


# ---------------------------------------------------------------- ORA integrals

@dataclass(frozen=True)
class OraResidual:
    value: float
    r_star: float
    per_r: np.ndarray


def _pack(per_r: np.ndarray, r: np.ndarray) -> OraResidual:
    if per_r.size == 0:
        return OraResidual(0.0, float("nan"), per_r)
    k = int(np.argmax(per_r))
    return OraResidual(float(per_r[k]), float(r[k]), per_r)


def ora_residual_rab(series: TailSeries, beta: RemovalMeasure) -> OraResidual:
    """Discrete Stieltjes sum over entries of u([r, inf)) * beta((-inf, r) x dt)."""
    r = series.r_grid
    if len(beta) == 0:
        return _pack(np.zeros(r.size), r)
    if len(beta) != series.tails.shape[0]:
        raise ValueError("series must have one state per removal entry")
    per_r = np.sum(series.tails * _left_masses(beta, r), axis=0)
    return _pack(per_r, r)


def ora_residual_raq(series: TailSeries, beta: RemovalMeasure, q) -> tuple[OraResidual, OraResidual]:
    """The two one-sided sums: mass above q(t) right of r against removal left
    of r, and mass above 1 - t - q(t) left of r against removal right of r."""
    r = series.r_grid
    if len(beta) == 0:
        z = _pack(np.zeros(r.size), r)
        return z, z
    if len(beta) != series.tails.shape[0]:
        raise ValueError("series must have one state per removal entry")
    t = np.asarray(beta.times)
    qt = np.asarray(q(t), dtype=float)[:, None]
    left_b = _left_masses(beta, r)
    right_b = beta.masses()[:, None] - left_b
    left_u = series.totals[:, None] - series.tails
    plus = np.sum(np.clip(series.tails - qt, 0.0, None) * left_b, axis=0)
    minus = np.sum(np.clip(left_u - (1.0 - t[:, None] - qt), 0.0, None) * right_b, axis=0)
    return _pack(plus, r), _pack(minus, r)


# ---------------------------------------------------------------- Skorohod

def skorohod_map(path) -> np.ndarray:
    """Phi(phi)(t) = -inf_{s <= t} min(phi(s), 0)."""
    p = np.asarray(path, dtype=float)
    if p.size == 0:
        return p
    return -np.minimum.accumulate(np.minimum(p, 0.0))


@dataclass(frozen=True, eq=False)
class SkorohodProfile:
    times: np.ndarray
    u_hat: np.ndarray
    beta_hat: np.ndarray
    gamma_hat: np.ndarray

    def identity_defect(self) -> float:
        """sup_t |u_hat - gamma_hat - beta_hat|."""
        return float(np.max(np.abs(self.u_hat - self.gamma_hat - self.beta_hat), initial=0.0))

    def reconstruction_defect(self) -> float:
        """sup_t |Phi(gamma_hat) - beta_hat|."""
        return float(np.max(np.abs(skorohod_map(self.gamma_hat) - self.beta_hat), initial=0.0))


def profile_from_run(run, r: float) -> SkorohodProfile:
    """Profile of the lower branch at r on the recorded steps. The absorbed
    total plays the role of J, which the lower branch removes exactly."""
    steps = run.steps
    left = np.concatenate([[0.0], np.cumsum(_left_masses(run.removal_lower, np.array([r]))[:, 0])])
    total = np.concatenate([[0.0], np.cumsum(run.removal_lower.masses())])
    u_hat = np.array([_tails_at(u, np.array([r]))[0] for u in run.lower])
    b_left = left[steps]
    b_total = total[steps]
    gamma = u_hat + (b_total - b_left) - b_total
    return SkorohodProfile(run.delta * steps, u_hat, b_left, gamma)


def profile_from_trace(trace, r_index: int) -> SkorohodProfile:
    """Profile at r = trace.r_grid[r_index] on post-removal event states, with the
    removal count / N in place of J."""
    r = trace.r_grid[r_index]
    u_hat = trace.post_tails()[:, r_index]
    n = np.arange(1, trace.n_removals + 1) / trace.N
    b_left = np.cumsum(trace.removal_positions < r) / trace.N
    gamma = u_hat + (n - b_left) - n
    return SkorohodProfile(trace.removal_times, u_hat, b_left, gamma)


def skorohod_consistency(source, r) -> tuple[float, float]:
    """(reconstruction defect, identity defect) at one r.

    ``source`` is a barrier run (r is a position) or a trace recorded with an
    r_grid (r is an index into it).
    """
    if hasattr(source, "removal_lower"):
        prof = profile_from_run(source, float(r))
    else:
        prof = profile_from_trace(source, int(r))
    return prof.reconstruction_defect(), prof.identity_defect()


# ---------------------------------------------------------------- supports

def support_bounds(beta: RemovalMeasure, t1: float, t2: float) -> tuple[float, float]:
    """Infimum and supremum of the support of beta restricted to [t1, t2]."""
    if not t1 < t2:
        raise ValueError("need t1 < t2")
    lo, hi = math.inf, -math.inf
    for p in beta.window(t1, t2):
        s = p.support()
        if s is not None:
            lo, hi = min(lo, s[0]), max(hi, s[1])
    if lo == math.inf:
        raise EmptyWindow(f"no removal in [{t1}, {t2}]")
    return lo, hi


# ---------------------------------------------------------------- weak form

@dataclass(frozen=True)
class TestFunction:
    """phi(x, t) = amplitude * p(z) exp(-z^2/2) * chi(t), z = (x - center) / width.

    p is 1 for the Gaussian bump or 1 + c1 z + c2 z^2 for the polynomial kind;
    chi(t) = exp(1 - 1/(1 - (t/t_cut)^2)) on [0, t_cut) and 0 after, so chi(0) = 1
    and every time derivative vanishes at t_cut. In space the support is taken
    to be center +- 8 width.
    """

    __test__ = False  # not a pytest class

    center: float
    width: float
    t_cut: float
    amplitude: float = 1.0
    poly: tuple = ()

    SPAN = 8.0

    @property
    def kind(self) -> str:
        return "polynomial_bump" if self.poly else "gaussian_bump"

    def _p(self, z):
        c1, c2 = (tuple(self.poly) + (0.0, 0.0))[:2]
        return 1.0 + c1 * z + c2 * z * z, c1 + 2.0 * c2 * z, 2.0 * c2 + 0.0 * z

    def space(self, x, order: int = 0):
        z = (np.asarray(x, dtype=float) - self.center) / self.width
        g = np.exp(-0.5 * z * z)
        p, dp, ddp = self._p(z)
        if order == 0:
            return self.amplitude * p * g
        if order == 1:
            return self.amplitude * (dp - z * p) * g / self.width
        if order == 2:
            return self.amplitude * (ddp - 2.0 * z * dp + (z * z - 1.0) * p) * g / self.width ** 2
        raise ValueError("order must be 0, 1 or 2")

    def chi(self, t, order: int = 0):
        s = np.asarray(t, dtype=float) / self.t_cut
        inside = (s >= 0) & (s < 1)
        out = np.zeros_like(s)
        si = s[inside]
        base = np.exp(1.0 - 1.0 / (1.0 - si * si))
        if order == 0:
            out[inside] = base
        elif order == 1:
            out[inside] = base * (-2.0 * si / (1.0 - si * si) ** 2) / self.t_cut
        else:
            raise ValueError("order must be 0 or 1")
        return out

    def support(self) -> tuple[float, float]:
        return self.center - self.SPAN * self.width, self.center + self.SPAN * self.width


def _cell_integrals(phi_x, edges: np.ndarray) -> np.ndarray:
    """Simpson's rule for the integral of phi_x over every cell."""
    a, b = edges[:-1], edges[1:]
    return (b - a) / 6.0 * (phi_x(a) + 4.0 * phi_x(0.5 * (a + b)) + phi_x(b))


def _pair(u: DensityGrid, cells: np.ndarray) -> float:
    return float(np.dot(u.values, cells))


def _phi_against(payload, phi: TestFunction, t: float, cells0: np.ndarray) -> float:
    c = float(phi.chi(np.array([t]))[0])
    if c == 0:
        return 0.0
    if isinstance(payload, AtomList):
        return c * float(np.dot(payload.weights, phi.space(payload.locations)))
    if isinstance(payload, Slab):
        lo = payload.offset
        return c * float(np.dot(payload.values, cells0[lo:lo + payload.values.size]))
    return c * _pair(payload, cells0)


def weak_form_residual(u_series, times, beta: RemovalMeasure | None, sched: InjectionSchedule | None,
                       phi: TestFunction, n_time: int = 4001) -> float:
    """|LHS - RHS| of the weak formulation for one test function.

    u_series[k] is the density at times[k]; times must start at 0 and reach
    phi.t_cut. The time integral uses the trapezoid rule on the given times,
    space integrals use Simpson's rule inside each cell.
    """
    times = np.asarray(times, dtype=float)
    u0 = u_series[0]
    g = u0.grid
    lo, hi = phi.support()
    if lo < g.x_min or hi > g.x_max:
        raise SupportEscapesGrid(f"test function support [{lo:.3g}, {hi:.3g}] leaves the grid")
    if times[0] != 0.0 or times[-1] < phi.t_cut * (1 - 1e-12):
        raise SupportEscapesGrid("time series must cover [0, t_cut]")
    e = g.edges
    cells0 = _cell_integrals(lambda x: phi.space(x, 0), e)
    cells2 = _cell_integrals(lambda x: phi.space(x, 2), e)
    chi0 = phi.chi(times, 0)
    chi1 = phi.chi(times, 1)
    p0 = np.array([_pair(u, cells0) for u in u_series])
    p2 = np.array([_pair(u, cells2) for u in u_series])
    integrand = chi1 * p0 + 0.5 * chi0 * p2
    lhs = -float(np.sum(0.5 * (integrand[1:] + integrand[:-1]) * np.diff(times)))
    rhs = _pair(u0, cells0)
    if sched is not None and not sched.I.is_zero:
        mesh = np.linspace(0.0, phi.t_cut, n_time)
        dI = np.diff(np.asarray(sched.I(mesh), dtype=float))
        w_time = float(np.dot(phi.chi(0.5 * (mesh[1:] + mesh[:-1])), dI))
        space = 0.0
        if sched.atoms is not None:
            space += float(np.dot(sched.atoms.weights, phi.space(sched.atoms.locations)))
        if sched.density is not None:
            space += _pair(sched.density, cells0)
        rhs += w_time * space
    if beta is not None:
        rhs -= sum(_phi_against(p, phi, t, cells0) for t, p in zip(beta.times, beta.payloads))
    return abs(lhs - rhs)
