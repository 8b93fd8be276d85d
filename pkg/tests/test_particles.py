import numpy as np
import pytest
from scipy import stats

from oralab.errors import CouplingPreconditionViolated, NoSnapshotAtTime, PopulationUnderflow
from oralab.grid import Grid
from oralab.kernel import InjectionSchedule
from oralab.measures import AtomList
from oralab.particles import (EmpiricalTail, QuantileFunction, counting_times_of, empirical_tail,
                              quantile_rank, replica_seeds, simulate_coupled_rab, simulate_rab,
                              simulate_raq, write_trace_csv)
from oralab.rab import RabData
from oralab.raq import RaqData
from oralab.schedules import CumulativeSchedule, QuantileSchedule

G = Grid(-5.0, 6.0, 1100)


def rab(I=1.0, J=1.0, horizon=0.5, at=0.0):
    inj = InjectionSchedule(CumulativeSchedule.linear(I), atoms=AtomList.point(at)) if I else InjectionSchedule.none()
    return RabData(G.indicator(0, 1), inj, CumulativeSchedule.linear(J) if J else CumulativeSchedule.zero(), horizon)


def test_quantile_function_uniform_oracle():
    qf = QuantileFunction(G.indicator(0, 1))
    u = np.linspace(0.001, 0.999, 57)
    assert np.allclose(qf(u), stats.uniform.ppf(u), atol=1e-12)


def test_quantile_function_with_atoms():
    qf = QuantileFunction(atoms=AtomList.from_pairs([(-1.0, 0.25), (2.0, 0.75)]))
    assert np.array_equal(qf([0.1, 0.25, 0.3, 0.99]), [-1.0, -1.0, 2.0, 2.0])


def test_counting_times_floor_exact():
    t = counting_times_of(lambda s: np.asarray(s) * 1.0, 10, 5, 1.0)
    assert np.allclose(t, [0.1, 0.2, 0.3, 0.4, 0.5], atol=1e-15)
    assert all(np.floor(10 * t) == np.arange(1, 6))


def test_quantile_rank_three_particle_enumeration():
    # positions 0.1 < 0.5 < 0.9; rank counts from the right
    pos = [0.9, 0.5, 0.1]
    assert pos[quantile_rank(3, 0.5) - 1] == 0.5
    assert pos[quantile_rank(3, 0.0) - 1] == 0.9
    assert pos[quantile_rank(3, 1.0) - 1] == 0.1
    assert quantile_rank(3, 1 / 3) == 1


def test_no_flux_keeps_population():
    d = RabData(G.indicator(0, 1), InjectionSchedule.none(), CumulativeSchedule.zero(), 0.5)
    tr = simulate_rab(d, 200, snapshot_times=[0.0, 0.5], seed=1)
    assert tr.n_removals == 0 and tr.snapshot_at(0.5).size == 200


def test_rab_counts_follow_floors():
    tr = simulate_rab(rab(I=0.5, J=1.0), 100, snapshot_times=[0.25, 0.5], seed=3, r_grid=np.linspace(-1, 2, 7))
    for t in (0.25, 0.5):
        alive = tr.snapshot_at(t).size
        assert alive == 100 + np.floor(100 * 0.5 * t + 1e-9) - np.floor(100 * t + 1e-9)
    assert tr.ora_violations == 0
    assert tr.events_checked == tr.n_removals


def test_rab_removes_rightmost():
    # injected atoms far right are always removed first
    tr = simulate_rab(rab(I=1.0, J=1.0, at=4.0), 50, seed=0)
    assert np.all(tr.removal_positions > 3.0)


def test_underflow():
    with pytest.raises(PopulationUnderflow):
        simulate_rab(rab(I=0.0, J=0.99, horizon=0.99), 50)


def test_raq_zero_quantile_removes_rightmost():
    d = RaqData(G.indicator(0, 1), QuantileSchedule.constant_Q(0.0), 0.5)
    tr = simulate_raq(d, 200, snapshot_times=[0.5], seed=5, r_grid=np.linspace(-1, 2, 9))
    assert tr.n_removals == 100
    assert tr.snapshot_at(0.5).size == 100
    assert tr.ora_violations == 0


def test_empirical_tail_and_binomial_check():
    tr = simulate_rab(rab(I=0.0, J=0.0), 4000, snapshot_times=[0.0], seed=11)
    tail = empirical_tail(tr, 0.0)
    assert tail.total_mass == 1.0
    # u0 uniform on [0, 1]: mass on [0.3, inf) is 0.7
    sd = np.sqrt(0.7 * 0.3 / 4000)
    assert abs(tail(0.3) - 0.7) < 5 * sd
    with pytest.raises(NoSnapshotAtTime):
        tr.snapshot_at(0.1)


def test_empirical_tail_trivia():
    t = EmpiricalTail(np.array([0.0, 1.0, 1.0]), 4)
    assert np.array_equal(t([-1.0, 0.0, 0.5, 1.0, 2.0]), [0.75, 0.75, 0.5, 0.5, 0.0])


def test_determinism_and_seeds():
    a = simulate_rab(rab(), 300, snapshot_times=[0.5], seed=42)
    b = simulate_rab(rab(), 300, snapshot_times=[0.5], seed=42)
    assert np.array_equal(a.removal_positions, b.removal_positions)
    assert np.array_equal(a.snapshot_at(0.5), b.snapshot_at(0.5))
    s1, s2 = replica_seeds(7, 2), replica_seeds(7, 2)
    assert s1[1].generate_state(2).tolist() == s2[1].generate_state(2).tolist()


def test_coupled_identical_data_gives_identical_traces():
    d = rab()
    m, t = simulate_coupled_rab(d, d, 400, snapshot_times=[0.5], seed=2)
    assert np.allclose(m.snapshot_at(0.5), t.snapshot_at(0.5))


def test_coupled_more_removal_stays_dominated():
    m, t = simulate_coupled_rab(rab(J=0.5), rab(J=1.0), 400, snapshot_times=[0.25, 0.5], seed=4)
    for s in (0.25, 0.5):
        a, b = np.sort(m.snapshot_at(s))[::-1], np.sort(t.snapshot_at(s))[::-1]
        assert b.size <= a.size
        assert np.all(b <= a[: b.size] + 1e-12)
    assert t.ora_violations == 0


def test_coupled_precondition():
    with pytest.raises(CouplingPreconditionViolated):
        simulate_coupled_rab(rab(J=1.0), rab(J=0.5), 100)


def test_trace_csv(tmp_path):
    tr = simulate_rab(rab(), 100, snapshot_times=[0.5], seed=1)
    p = write_trace_csv(tr, tmp_path / "t.csv", run_id="x")
    lines = p.read_text().splitlines()
    assert lines[0] == "run_id,kind,time,position,label"
    assert len(lines) == 1 + tr.n_removals + tr.snapshot_at(0.5).size
