import warnings

import numpy as np
import pytest

from oralab.errors import AdmissibilityError, BarrierDiagnostic, DeltaTooLarge
from oralab.grid import Grid, cut_right, leq, order_excess
from oralab.kernel import InjectionSchedule, apply_kernel, inject, mild_solution_residual
from oralab.measures import AtomList
from oralab.rab import (RabData, certificate_factor, default_delta, expected_lower_mass,
                        expected_upper_mass, lower_only, lower_step, solve)
from oralab.schedules import CumulativeSchedule

G = Grid(-5.0, 6.0, 1100)


def data(horizon=0.3, I=1.0, J=1.0):
    inj = InjectionSchedule(CumulativeSchedule.linear(I), atoms=AtomList.point(0.0)) if I else InjectionSchedule.none()
    return RabData(G.indicator(0, 1), inj, CumulativeSchedule.linear(J), horizon)


@pytest.fixture(autouse=True)
def _quiet():
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", BarrierDiagnostic)
        yield


def test_certificate_factor_and_default_delta():
    assert certificate_factor(0.1, 1e-4) == pytest.approx(np.exp(-0.5))
    assert default_delta(0.2) == pytest.approx(0.2 ** 5)
    assert default_delta(0.9) == 1e-3


def test_admissibility():
    with pytest.raises(AdmissibilityError):
        RabData(G.indicator(0, 1), InjectionSchedule.none(), CumulativeSchedule.linear(2.0), 0.6)
    with pytest.raises(AdmissibilityError):
        RabData(G.indicator(0, 2), InjectionSchedule.none(), CumulativeSchedule.zero(), 0.6)
    with pytest.raises(DeltaTooLarge):
        solve(data(J=1.5, I=0.0, horizon=0.6), 0.2, 1e-2)


def test_one_lower_step_by_hand():
    d = data()
    got, removed = lower_step(d.u0, 1, d, 0.01)
    expect = cut_right(inject(apply_kernel(d.u0, 0.01), d.injection, 0.0, 0.01), 0.01)
    assert got.allclose(expect.kept, atol=0)
    assert removed.total_mass == pytest.approx(0.01)


def test_mass_ledgers():
    d = data()
    run = solve(d, 0.05, 2e-3, stride=10)
    for n in range(run.n_steps + 1):
        assert run.lower_mass[n] == pytest.approx(expected_lower_mass(d, 2e-3, n), rel=1e-11)
        assert run.upper_mass[n] == pytest.approx(expected_upper_mass(d, 0.05, 2e-3, n), rel=1e-11)


def test_sandwich_certificate_holds():
    run = solve(data(), 0.05, 2e-3, stride=10)
    assert np.all(run.measured_gap <= run.gap_bound + 1e-12)
    assert np.allclose(run.gap_bound, 0.05 + certificate_factor(0.05, 2e-3) * run.step_times)
    for lo, up in zip(run.lower, run.upper):
        assert leq(lo, up, m=0.0) or order_excess(lo, up) < 1e-12  # lower below upper too


def test_no_removal_reduces_to_heat_flow():
    d = RabData(G.indicator(0, 1), InjectionSchedule.none(), CumulativeSchedule.zero(), 0.1)
    run = solve(d, 0.05, 0.01)
    u = d.u0
    for _ in range(10):
        u = apply_kernel(u, 0.01)
    assert run.lower[-1].allclose(u, atol=1e-15)
    assert run.upper[-1].allclose(u, atol=1e-15)


def test_lower_barrier_satisfies_mild_formula():
    d = data(horizon=0.2)
    steps, out, rem = lower_only(d, 1e-2)
    res = mild_solution_residual(d.u0, rem, d.injection, out[-1], 0.2, sub_steps=20)
    assert res < 5e-2 * out[-1].sup_norm()


def test_larger_removal_gives_lower_barrier():
    _, a, _ = lower_only(data(J=1.0), 5e-3)
    _, b, _ = lower_only(data(J=2.0, horizon=0.3), 5e-3)
    assert all(leq(y, x) for x, y in zip(a, b))


def test_snapshots_and_accessors():
    run = solve(data(), 0.05, 1e-2, stride=5)
    assert list(run.steps) == [0, 5, 10, 15, 20, 25, 30]
    assert run.lower_at(0.1).total_mass == pytest.approx(1.0)
    with pytest.raises(KeyError):
        run.lower_at(0.03)
    with pytest.raises(ValueError):
        run.pre_removal_lower()
    mid = run.mid_at(0.3)
    assert mid.total_mass == pytest.approx(0.5 * (run.lower_mass[-1] + run.upper_mass[-1]))
    assert sum(run.mid_removal.masses()) == pytest.approx(0.5 * (sum(run.removal_lower.masses()) +
                                                                  sum(run.removal_upper.masses())))


def test_ora_accumulator_matches_series_computation():
    from oralab.diagnostics import ora_residual_rab, series_from_run
    r = np.linspace(-1, 3, 17)
    run = solve(data(), 0.05, 1e-2, ora_grid=r)
    ref = ora_residual_rab(series_from_run(run, r), run.removal_lower)
    assert np.allclose(run.diagnostics["ora_per_r"], ref.per_r, atol=1e-15)
