"""Event-driven simulators for the two particle systems.

Positions are only materialized at event and snapshot times, by adding exact
Gaussian increments, so the simulators carry no time-discretization error.
Removal and injection times are the jump times of t -> floor(N * S(t)) for
the relevant cumulative curve S.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import (CouplingPreconditionViolated, InvariantViolation, NoSnapshotAtTime,
                     PopulationUnderflow)
from .grid import DensityGrid, head_array
from .kernel import InjectionSchedule
from .measures import AtomList, RemovalMeasure
from .rab import RabData
from .raq import RaqData
from .schedules import CumulativeSchedule, ceil_conv, floor_count, time_mesh


# ---------------------------------------------------------------- sampling

class QuantileFunction:
    """Inverse CDF of a mixture of grid density and atoms.

    Feeding one uniform to two quantile functions gives the monotone coupling:
    if the first distribution is below the second in the tail order, every
    draw from the first is at most the matching draw from the second.
    """

    def __init__(self, density: DensityGrid | None = None, atoms: AtomList | None = None):
        pts, jump = [], []
        if density is not None and density.total_mass > 0:
            e = density.grid.edges
            pts.append(e)
            jump.append(np.zeros(e.size))
        if atoms is not None and len(atoms):
            pts.append(atoms.locations)
            jump.append(atoms.weights)
        if not pts:
            raise ValueError("empty distribution")
        p = np.concatenate(pts)
        j = np.concatenate(jump)
        order = np.argsort(p, kind="stable")
        p, j = p[order], j[order]
        uniq, inv = np.unique(p, return_inverse=True)
        jumps = np.bincount(inv, weights=j, minlength=uniq.size)
        cont = np.zeros(uniq.size)  # density mass to the left of each point
        if density is not None and density.total_mass > 0:
            cont = np.interp(uniq, density.grid.edges, head_array(density.values, density.grid.h))
        self.points = uniq
        self.cdf_right = cont + np.cumsum(jumps)
        self.cdf_left = self.cdf_right - jumps
        self.total = float(self.cdf_right[-1])

    def __call__(self, u) -> np.ndarray:
        y = np.asarray(u, dtype=float) * self.total
        i = np.searchsorted(self.cdf_right, y, side="left")
        i = np.clip(i, 0, self.points.size - 1)
        left = self.cdf_left[i]
        x = self.points[i].astype(float)
        inside = (y < left) & (i > 0)
        if np.any(inside):
            k = i[inside]
            lo_f = self.cdf_right[k - 1]
            span = left[inside] - lo_f
            frac = np.where(span > 0, (y[inside] - lo_f) / np.where(span > 0, span, 1.0), 1.0)
            x[inside] = self.points[k - 1] + frac * (self.points[k] - self.points[k - 1])
        return x


def injection_quantile(sched: InjectionSchedule) -> QuantileFunction | None:
    if sched.atoms is None and sched.density is None:
        return None
    return QuantileFunction(sched.density, sched.atoms)


def replica_seeds(seed: int | None, n: int) -> list[np.random.SeedSequence]:
    """Independent per-replica streams; identical for any thread count."""
    return np.random.SeedSequence(seed).spawn(n)


def _rng(seed) -> np.random.Generator:
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)


def counting_times_of(f, n_scale: int, count: int, horizon: float) -> np.ndarray:
    """First times in [0, horizon] at which floor(n_scale * f(t)) reaches 1..count,
    for any nondecreasing callable f (found by bisection to the last ulp)."""
    if count <= 0:
        return np.zeros(0)
    k = np.arange(1, count + 1, dtype=float)
    lo = np.zeros(count)
    hi = np.full(count, float(horizon))
    reached = np.floor(n_scale * np.asarray(f(hi), dtype=float)) >= k
    if not np.all(reached):
        raise ValueError("requested more jumps than the curve makes on [0, horizon]")
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        ok = np.floor(n_scale * np.asarray(f(mid), dtype=float)) >= k
        hi = np.where(ok, mid, hi)
        lo = np.where(ok, lo, mid)
        if np.all(np.nextafter(lo, np.inf) >= hi):
            break
    at_zero = np.floor(n_scale * np.asarray(f(np.zeros(count)), dtype=float)) >= k
    return np.where(at_zero, 0.0, hi)


def _jump_times(S: CumulativeSchedule, N: int, horizon: float) -> np.ndarray:
    count = int(floor_count(N, S(horizon)))
    if count <= 0:
        return np.zeros(0)
    return S.counting_times(N, count)


# ---------------------------------------------------------------- traces

@dataclass(frozen=True, eq=False)
class EmpiricalTrace:
    """Record of one simulator run. Empirical measures carry weight 1/N per particle.

    ``pre_tails[k, i]`` is the tail count / N at ``r_grid[i]`` of the
    configuration just before removal k (after any simultaneous injection).
    """

    model: str
    N: int
    snapshot_times: np.ndarray
    snapshots: tuple
    removal_times: np.ndarray
    removal_positions: np.ndarray
    removal_labels: np.ndarray
    injection_times: np.ndarray
    r_grid: np.ndarray | None = None
    pre_tails: np.ndarray | None = None
    ora_violations: int = 0
    events_checked: int = 0

    def snapshot_index(self, t: float) -> int:
        hits = np.nonzero(np.isclose(self.snapshot_times, t, rtol=0.0, atol=1e-12))[0]
        if hits.size == 0:
            raise NoSnapshotAtTime(f"no snapshot at t={t}")
        return int(hits[0])

    def snapshot_at(self, t: float) -> np.ndarray:
        return self.snapshots[self.snapshot_index(t)]

    @property
    def n_removals(self) -> int:
        return int(self.removal_times.size)

    def removals_by(self, t: float) -> int:
        return int(np.searchsorted(self.removal_times, t, side="right"))

    def injections_by(self, t: float) -> int:
        return int(np.searchsorted(self.injection_times, t, side="right"))

    def removal_measure(self) -> RemovalMeasure:
        beta = RemovalMeasure()
        w = 1.0 / self.N
        for t, x in zip(self.removal_times, self.removal_positions):
            beta.add(float(t), AtomList.point(float(x), w))
        return beta

    def post_tails(self) -> np.ndarray:
        """Tail count / N at r_grid just after each removal."""
        if self.pre_tails is None:
            raise ValueError("run was not recorded with an r_grid")
        hit = self.removal_positions[:, None] >= self.r_grid[None, :]
        return self.pre_tails - hit / self.N


class EmpiricalTail:
    """r -> (#particles at or right of r) / N for a sorted position array."""

    def __init__(self, sorted_positions: np.ndarray, N: int):
        self.positions = np.asarray(sorted_positions, dtype=float)
        self.N = N

    @property
    def total_mass(self) -> float:
        return self.positions.size / self.N

    def __call__(self, r):
        r = np.asarray(r, dtype=float)
        return (self.positions.size - np.searchsorted(self.positions, r, side="left")) / self.N


def empirical_tail(trace: EmpiricalTrace, t: float) -> EmpiricalTail:
    return EmpiricalTail(trace.snapshot_at(t), trace.N)


def write_trace_csv(trace: EmpiricalTrace, path, run_id: str = "") -> Path:
    """One row per removal event, then one block per snapshot of sorted positions."""
    path = Path(path)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["run_id", "kind", "time", "position", "label"])
        for t, x, lab in zip(trace.removal_times, trace.removal_positions, trace.removal_labels):
            w.writerow([run_id, "removal", f"{t:.17g}", f"{x:.17g}", int(lab)])
        for t, snap in zip(trace.snapshot_times, trace.snapshots):
            for x in snap:
                w.writerow([run_id, "snapshot", f"{t:.17g}", f"{x:.17g}", ""])
    return path


def _tail_counts(pos: np.ndarray, r_sorted: np.ndarray) -> np.ndarray:
    """Number of entries of pos that are >= each r."""
    idx = np.searchsorted(r_sorted, pos, side="right")
    c = np.bincount(idx, minlength=r_sorted.size + 1)
    return np.cumsum(c[::-1])[::-1][1:]


# ---------------------------------------------------------------- RAB

class _Cloud:
    """Alive particles stored compactly, plus newborns that have not moved yet."""

    def __init__(self, x0: np.ndarray, capacity: int, rng: np.random.Generator):
        self.pos = np.empty(capacity)
        self.lab = np.empty(capacity, dtype=np.int64)
        n = x0.size
        self.pos[:n] = x0
        self.lab[:n] = np.arange(n)
        self.n = n
        self.t = 0.0
        self.born: list = []  # (label, time, x)
        self.rng = rng

    def advance(self, t: float) -> None:
        dt = t - self.t
        if dt > 0 and self.n:
            self.pos[:self.n] += math.sqrt(dt) * self.rng.standard_normal(self.n)
        self.t = max(self.t, t)
        for lab, b, x in self.born:
            if t > b:
                x = x + math.sqrt(t - b) * self.rng.standard_normal()
            self.pos[self.n] = x
            self.lab[self.n] = lab
            self.n += 1
        self.born.clear()

    def add(self, label: int, t: float, x: float) -> None:
        self.born.append((label, t, x))

    def alive(self) -> np.ndarray:
        return self.pos[:self.n]

    def take(self, i: int) -> tuple[float, int]:
        x, lab = float(self.pos[i]), int(self.lab[i])
        last = self.n - 1
        self.pos[i], self.lab[i] = self.pos[last], self.lab[last]
        self.n = last
        return x, lab

    def pick(self, value: float) -> int:
        """Index of the alive particle at `value` with the smallest label."""
        idx = np.nonzero(self.pos[:self.n] == value)[0]
        if idx.size == 1:
            return int(idx[0])
        return int(idx[np.argmin(self.lab[idx])])


def _snapshot_plan(snapshot_times, horizon: float) -> np.ndarray:
    s = np.unique(np.asarray(list(snapshot_times), dtype=float))
    if s.size and (s[0] < 0 or s[-1] > horizon + 1e-12):
        raise ValueError("snapshot times must lie in [0, horizon]")
    return s


def _merge(*streams) -> list:
    """Events (time, kind, payload index) sorted by time, then by kind."""
    ev = []
    for kind, times in streams:
        ev.extend((float(t), kind, k) for k, t in enumerate(times))
    ev.sort(key=lambda e: (e[0], e[1]))
    return ev


INJECT, REMOVE, SNAP = 0, 1, 2


def simulate_rab(data: RabData, N: int, snapshot_times=(), seed=None, r_grid=None,
                 check: bool = True) -> EmpiricalTrace:
    """Run the removal-at-boundary system: N initial particles drawn from u0,
    injections from pi at the jumps of floor(N I), and at every jump of
    floor(N J) the rightmost particle (ties to the smallest label) is removed.
    A particle injected at a removal time is a removal candidate.
    """
    if N * data.epsilon0 - 1 < 1:
        raise PopulationUnderflow(f"N * epsilon0 - 1 = {N * data.epsilon0 - 1:.3g} must be at least 1")
    rng = _rng(seed)
    T = data.horizon
    snaps_t = _snapshot_plan(snapshot_times, T)
    x0 = QuantileFunction(data.u0)(rng.random(N))
    inj = _jump_times(data.I, N, T)
    rem = _jump_times(data.J, N, T)
    piq = injection_quantile(data.injection)
    cloud = _Cloud(x0, N + inj.size, rng)
    r_sorted = None if r_grid is None else np.sort(np.asarray(r_grid, dtype=float))
    pre = []
    out_t, out_x, out_l, snaps = [], [], [], []
    n_inj = n_rem = violations = 0
    for t, kind, k in _merge((INJECT, inj), (REMOVE, rem), (SNAP, snaps_t)):
        if kind == INJECT:
            cloud.add(N + k, t, float(piq(rng.random())))
            n_inj += 1
        elif kind == REMOVE:
            cloud.advance(t)
            if cloud.n == 0:
                raise PopulationUnderflow(f"no particle alive at removal time {t}")
            alive = cloud.alive()
            if r_sorted is not None:
                pre.append(_tail_counts(alive, r_sorted) / N)
            x = float(alive.max())
            i = cloud.pick(x)
            # exact ORA: nothing alive strictly right of the removed particle
            bad = bool(np.any(alive > x))
            ledger = cloud.n == N + n_inj - n_rem
            if bad or not ledger:
                violations += 1
                if check:
                    raise InvariantViolation(f"removal at t={t}: ORA={not bad}, count ledger={ledger}")
            x, lab = cloud.take(i)
            n_rem += 1
            out_t.append(t)
            out_x.append(x)
            out_l.append(lab)
        else:
            cloud.advance(t)
            snaps.append(np.sort(cloud.alive()))
    return EmpiricalTrace("rab", N, snaps_t, tuple(snaps), np.array(out_t), np.array(out_x),
                          np.array(out_l, dtype=np.int64), inj,
                          r_sorted, np.array(pre) if r_sorted is not None else None,
                          violations, len(out_t))


# ---------------------------------------------------------------- RAQ

def quantile_rank(n: int, Q: float) -> int:
    """Rank (1 = rightmost) of the particle removed from n alive at level Q."""
    return min(ceil_conv(n * Q), n)


def simulate_raq(data: RaqData, N: int, snapshot_times=(), seed=None, r_grid=None,
                 check: bool = True) -> EmpiricalTrace:
    """Run the removal-at-quantile system: at t_k = k/N the particle of rank
    ceil(n Q(t_k)) from the right among the n alive is removed (ceil(0) = 1)."""
    if N < 1:
        raise ValueError("N must be positive")
    rng = _rng(seed)
    T = data.horizon
    snaps_t = _snapshot_plan(snapshot_times, T)
    cloud = _Cloud(QuantileFunction(data.u0)(rng.random(N)), N, rng)
    K = min(int(math.floor(N * T + 1e-9)), N)
    rem = np.arange(1, K + 1) / N
    r_sorted = None if r_grid is None else np.sort(np.asarray(r_grid, dtype=float))
    pre = []
    out_t, out_x, out_l, snaps = [], [], [], []
    violations = 0
    for t, kind, k in _merge((REMOVE, rem), (SNAP, snaps_t)):
        cloud.advance(t)
        if kind == SNAP:
            snaps.append(np.sort(cloud.alive()))
            continue
        alive = cloud.alive()
        n = cloud.n
        if r_sorted is not None:
            pre.append(_tail_counts(alive, r_sorted) / N)
        m = quantile_rank(n, float(data.q.Q(t)))
        x = float(np.partition(alive, n - m)[n - m])
        i = cloud.pick(x)
        right = int(np.count_nonzero(alive > x))
        left = int(np.count_nonzero(alive < x))
        ok = right <= m - 1 and left <= n - m and n == N - k
        if not ok:
            violations += 1
            if check:
                raise InvariantViolation(f"removal {k + 1} at t={t}: {right} right, {left} left of rank {m}/{n}")
        x, lab = cloud.take(i)
        out_t.append(t)
        out_x.append(x)
        out_l.append(lab)
    return EmpiricalTrace("raq", N, snaps_t, tuple(snaps), np.array(out_t), np.array(out_x),
                          np.array(out_l, dtype=np.int64), np.zeros(0),
                          r_sorted, np.array(pre) if r_sorted is not None else None,
                          violations, len(out_t))


# ---------------------------------------------------------------- coupled RAB

def _check_nondecreasing(f, horizon: float, what: str, *schedules) -> None:
    t = time_mesh(horizon, *schedules)
    if np.any(np.diff(np.asarray(f(t), dtype=float)) < -1e-12):
        raise CouplingPreconditionViolated(f"{what} must be nondecreasing")


def _check_quantiles(lo: QuantileFunction | None, hi: QuantileFunction | None, what: str) -> None:
    if lo is None or hi is None:
        return
    u = (np.arange(4096) + 0.5) / 4096
    if np.any(lo(u) > hi(u) + 1e-12):
        raise CouplingPreconditionViolated(f"{what}: tilde distribution must lie below in the tail order")


def simulate_coupled_rab(data: RabData, data_tilde: RabData, N: int, snapshot_times=(), seed=None,
                         check: bool = True) -> tuple[EmpiricalTrace, EmpiricalTrace]:
    """Run both systems on shared randomness so that the tilde system stays below.

    The tilde system removes at the jumps of floor(N J) + floor(N (J~ - J)), so
    each removal of the main system is also a tilde removal; the main system
    injects at the jumps of floor(N I~) + floor(N (I - I~)), so each tilde
    injection is a main injection. Every tilde particle follows the Brownian
    increments of a partner main particle lying at or right of it; when the
    main system removes a partner, the orphan is re-paired with the main
    partner of the removed tilde particle. Dominance of the sorted
    configurations is checked at every event.
    """
    if data.horizon != data_tilde.horizon:
        raise CouplingPreconditionViolated("both systems need the same horizon")
    T = data.horizon
    for d in (data, data_tilde):
        if N * d.epsilon0 - 1 < 1:
            raise PopulationUnderflow("N * epsilon0 - 1 must be at least 1")
    I, It, J, Jt = data.I, data_tilde.I, data.J, data_tilde.J
    _check_nondecreasing(lambda t: I(t) - It(t), T, "I - I~", I, It)
    _check_nondecreasing(lambda t: Jt(t) - J(t), T, "J~ - J", J, Jt)
    u0q, u0tq = QuantileFunction(data.u0), QuantileFunction(data_tilde.u0)
    _check_quantiles(u0tq, u0q, "initial data")
    piq, pitq = injection_quantile(data.injection), injection_quantile(data_tilde.injection)
    _check_quantiles(pitq, piq, "injection law")

    rng = _rng(seed)
    snaps_t = _snapshot_plan(snapshot_times, T)
    shared_inj = _jump_times(It, N, T)
    extra_inj = counting_times_of(lambda t: I(t) - It(t), N,
                                  int(floor_count(N, I(T) - It(T))), T)
    shared_rem = _jump_times(J, N, T)
    extra_rem = counting_times_of(lambda t: Jt(t) - J(t), N,
                                  int(floor_count(N, Jt(T) - J(T))), T)

    cap = N + shared_inj.size + extra_inj.size
    pos = np.empty(cap)
    alive = np.zeros(cap, dtype=bool)
    U = rng.random(N)
    pos[:N] = u0q(U)
    alive[:N] = True
    next_label = N
    # tilde particle -> (partner main label, offset >= 0); keyed by tilde label
    partner: dict[int, int] = {}
    offset: dict[int, float] = {}
    owner: dict[int, int] = {}  # main label -> tilde label
    xt0 = u0tq(U)
    for i in range(N):
        off = float(pos[i] - xt0[i])
        if off < 0:
            raise CouplingPreconditionViolated("initial draws are not ordered")
        partner[i], offset[i], owner[i] = i, off, i
    next_tilde = N
    t_now = 0.0

    def advance(t):
        nonlocal t_now
        dt = t - t_now
        if dt > 0:
            idx = np.nonzero(alive)[0]
            pos[idx] += math.sqrt(dt) * rng.standard_normal(idx.size)
        t_now = max(t_now, t)

    def tilde_positions():
        labs = np.fromiter(partner.keys(), dtype=np.int64, count=len(partner))
        if labs.size == 0:
            return labs, np.zeros(0)
        mains = np.fromiter((partner[k] for k in labs), dtype=np.int64, count=labs.size)
        offs = np.fromiter((offset[k] for k in labs), dtype=float, count=labs.size)
        return labs, pos[mains] - offs

    def argmax_min_label(labels, values):
        m = values.max()
        hits = np.nonzero(values == m)[0]
        j = hits[np.argmin(labels[hits])]
        return int(labels[j]), float(values[j])

    rec = {"main": ([], [], []), "tilde": ([], [], [])}
    inj_rec = {"main": [], "tilde": []}
    snaps_m, snaps_tl = [], []
    violations = 0
    events = 0

    def remove_tilde_rightmost(t):
        labs, xs = tilde_positions()
        if labs.size == 0:
            raise PopulationUnderflow("tilde system emptied")
        lab, x = argmax_min_label(labs, xs)
        m = partner.pop(lab)
        offset.pop(lab)
        owner.pop(m, None)
        r = rec["tilde"]
        r[0].append(t); r[1].append(x); r[2].append(lab)
        return m

    def dominance_ok() -> bool:
        main = np.sort(pos[alive])[::-1]
        _, xs = tilde_positions()
        til = np.sort(xs)[::-1]
        return til.size <= main.size and bool(np.all(til <= main[:til.size]))

    SHARED_INJ, EXTRA_INJ, SHARED_REM, EXTRA_REM = 0, 1, 2, 3
    stream = _merge((SHARED_INJ, shared_inj), (EXTRA_INJ, extra_inj), (SHARED_REM, shared_rem),
                    (EXTRA_REM, extra_rem), (SNAP + 2, snaps_t))
    for t, kind, _ in stream:
        advance(t)
        if kind in (SHARED_INJ, EXTRA_INJ):
            u = rng.random()
            lab = next_label
            next_label += 1
            pos[lab] = float(piq(u))
            alive[lab] = True
            inj_rec["main"].append(t)
            if kind == SHARED_INJ:
                xt = float(pitq(u))
                off = pos[lab] - xt
                if off < 0:
                    raise CouplingPreconditionViolated("injection draws are not ordered")
                partner[next_tilde], offset[next_tilde], owner[lab] = lab, off, next_tilde
                next_tilde += 1
                inj_rec["tilde"].append(t)
        elif kind == SHARED_REM:
            idx = np.nonzero(alive)[0]
            if idx.size == 0:
                raise PopulationUnderflow("main system emptied")
            M, xM = argmax_min_label(idx, pos[idx])
            m = remove_tilde_rightmost(t)
            orphan = owner.pop(M, None)
            if orphan is not None:
                # re-pair with the freed main particle, which lies at or right of it
                x_orphan = pos[M] - offset[orphan]
                partner[orphan] = m
                offset[orphan] = max(0.0, float(pos[m] - x_orphan))
                owner[m] = orphan
            alive[M] = False
            r = rec["main"]
            r[0].append(t); r[1].append(xM); r[2].append(M)
        elif kind == EXTRA_REM:
            remove_tilde_rightmost(t)
        else:
            snaps_m.append(np.sort(pos[alive]))
            snaps_tl.append(np.sort(tilde_positions()[1]))
        events += 1
        if not dominance_ok():
            violations += 1
            if check:
                raise InvariantViolation(f"tail dominance failed at t={t}")

    def build(name, snaps, inj_times):
        r = rec[name]
        return EmpiricalTrace("rab", N, snaps_t, tuple(snaps), np.array(r[0]), np.array(r[1]),
                              np.array(r[2], dtype=np.int64), np.array(inj_times),
                              ora_violations=violations, events_checked=events)

    return build("main", snaps_m, inj_rec["main"]), build("tilde", snaps_tl, inj_rec["tilde"])
