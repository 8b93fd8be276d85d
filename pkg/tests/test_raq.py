import warnings

import numpy as np
import pytest

from oralab.errors import AdmissibilityError, BarrierDiagnostic, ValidityWindowExceeded
from oralab.grid import Grid, cut_right, r_right, uniform_slab
from oralab.kernel import apply_kernel
from oralab.raq import (RaqData, certificate_window, expected_mass_raq, gap_bound_raq,
                        lower_step_raq, solution_after_extinction, solve_raq, upper_step_raq)
from oralab.rab import certificate_factor
from oralab.schedules import QuantileSchedule

G = Grid(-6.0, 6.0, 1200)


@pytest.fixture(autouse=True)
def _quiet():
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", BarrierDiagnostic)
        yield


def data(Q=0.5, horizon=0.3):
    return RaqData(G.indicator(0, 1), QuantileSchedule.constant_Q(Q), horizon)


def test_admissibility():
    with pytest.raises(AdmissibilityError):
        data(horizon=1.0)
    with pytest.raises(AdmissibilityError):
        RaqData(G.indicator(0, 1), QuantileSchedule("q_piecewise_linear", (0, 1), (0.9, 0.9)), 0.5)


def test_validity_window():
    d = data(horizon=0.5)
    with pytest.raises(ValidityWindowExceeded):
        upper_step_raq(d.u0, 960, d, 0.05, 1e-3)
    with pytest.raises(ValueError):
        solve_raq(d, 0.01, 0.02)


def test_zero_quantile_lower_step_is_rightmost_cut_plus_slab():
    d = data(Q=0.0)
    Delta, delta = 0.05, 1e-3
    got, removed = lower_step_raq(d.u0, 1, d, Delta, delta)
    w = apply_kernel(d.u0, delta)
    expect = cut_right(w, delta).kept + uniform_slab(G, -r_right(w.reflected(), Delta) - 1.0,
                                                     certificate_factor(Delta, delta) * delta)
    assert got.allclose(expect, atol=1e-12)


def test_mass_ledger():
    run = solve_raq(data(), 0.05, 2e-3, stride=25)
    for n in range(run.n_steps + 1):
        assert run.lower_mass[n] == pytest.approx(expected_mass_raq(0.05, 2e-3, n), rel=1e-11)
        assert run.upper_mass[n] == pytest.approx(expected_mass_raq(0.05, 2e-3, n), rel=1e-11)


def test_gap_bound_formula():
    e = certificate_factor(0.1, 1e-3)
    assert gap_bound_raq(0.1, 1e-3, 7) == pytest.approx(0.3 + 7e-3 * e + e)
    assert certificate_window(0.1, 1e-4) == pytest.approx(0.7 - np.exp(-0.5))


def test_measured_gap_inside_bound():
    run = solve_raq(data(), 0.2, 1e-4, stride=500)
    assert run.certified.any()
    assert np.all(run.measured_gap[run.certified] <= run.gap_bound[run.certified] + 1e-12)
    assert run.diagnostics["uncertified_violations"] == 0


def test_reflection_identity_in_extreme_branches():
    # Q = 1 sends the upper cut to the far left; its mirror image (Q = 0) cuts the far
    # right. While (n - 1) e delta <= Delta + delta the two barriers are exact mirrors.
    Delta, delta = 0.05, 1e-3
    d = data(Q=1.0, horizon=0.04)
    up = solve_raq(d, Delta, delta, check=False).upper[-1]
    lo = solve_raq(d.reflected(), Delta, delta, check=False).lower[-1]
    assert up.reflected().allclose(lo, atol=1e-12)


def test_extinction():
    z = solution_after_extinction(G)
    assert z.total_mass == 0.0
