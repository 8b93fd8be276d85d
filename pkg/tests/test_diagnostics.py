import numpy as np
import pytest

from oralab.diagnostics import (TailSeries, TestFunction, ora_residual_rab, ora_residual_raq,
                                skorohod_map, support_bounds, weak_form_residual)
from oralab.errors import EmptyWindow, SupportEscapesGrid
from oralab.grid import Grid
from oralab.kernel import apply_kernel
from oralab.measures import AtomList, RemovalMeasure

S = np.linspace(0.0, 6.0, 601)


def test_skorohod_map_analytic_cases():
    assert np.allclose(skorohod_map(-S), S)
    assert np.all(skorohod_map(np.abs(np.sin(S))) == 0)
    expect = 1.0 - np.cos(np.minimum(S, np.pi))
    assert np.allclose(skorohod_map(np.cos(S) - 1.0), expect)
    assert skorohod_map([]).size == 0


def two_event_beta():
    b = RemovalMeasure()
    b.add(0.1, AtomList.point(0.0, 0.5))
    b.add(0.2, AtomList.point(2.0, 0.1))
    return b


def test_ora_two_event_hand_oracle():
    # first removal happens at 0 while 0.3 mass sits at or right of r = 1
    r = np.array([-1.0, 1.0, 3.0])
    series = TailSeries(np.array([0.1, 0.2]), r,
                        np.array([[1.0, 0.3, 0.0], [0.5, 0.2, 0.0]]), np.array([1.0, 0.5]))
    res = ora_residual_rab(series, two_event_beta())
    assert np.allclose(res.per_r, [0.0, 0.15, 0.0])
    assert res.value == pytest.approx(0.15) and res.r_star == 1.0


def test_ora_empty_beta():
    r = np.array([0.0, 1.0])
    s = TailSeries(np.zeros(0), r, np.zeros((0, 2)), np.zeros(0))
    assert ora_residual_rab(s, RemovalMeasure()).value == 0.0
    plus, minus = ora_residual_raq(s, RemovalMeasure(), lambda t: 0.0 * t)
    assert plus.value == minus.value == 0.0


def test_ora_raq_positive_parts():
    r = np.array([1.0])
    s = TailSeries(np.array([0.1, 0.2]), r, np.array([[0.3], [0.2]]), np.array([1.0, 0.5]))
    # q = 0.1: excess above q at r = 1 is 0.2 on the first event
    plus, minus = ora_residual_raq(s, two_event_beta(), lambda t: np.full_like(t, 0.1))
    assert plus.value == pytest.approx(0.2 * 0.5)
    # second event removes at 2 > r; mass left of r is 0.3, bound 1 - 0.2 - 0.1 = 0.7
    assert minus.value == 0.0


def test_support_bounds():
    b = RemovalMeasure()
    b.add(0.5, AtomList.point(2.0, 0.5))
    assert support_bounds(b, 0.0, 1.0) == (2.0, 2.0)
    assert support_bounds(two_event_beta(), 0.0, 1.0) == (0.0, 2.0)
    with pytest.raises(EmptyWindow):
        support_bounds(b, 0.6, 1.0)


def test_test_function_derivatives():
    phi = TestFunction(0.3, 0.7, 0.5, amplitude=1.5, poly=(0.2, -0.1))
    x, h = np.linspace(-2, 2, 9), 1e-4
    d1 = (phi.space(x + h) - phi.space(x - h)) / (2 * h)
    d2 = (phi.space(x + h) - 2 * phi.space(x) + phi.space(x - h)) / h ** 2
    assert np.allclose(phi.space(x, 1), d1, atol=1e-7)
    assert np.allclose(phi.space(x, 2), d2, atol=1e-5)
    t = np.linspace(0.05, 0.45, 9)
    dc = (phi.chi(t + h) - phi.chi(t - h)) / (2 * h)
    assert np.allclose(phi.chi(t, 1), dc, atol=1e-6)
    assert phi.chi(np.array([0.0]))[0] == 1.0 and phi.chi(np.array([0.5]))[0] == 0.0


def heat_series(g, dt=1e-3, n=200):
    u = g.indicator(0, 1)
    out = [u]
    for _ in range(n):
        u = apply_kernel(u, dt)
        out.append(u)
    return out, dt * np.arange(n + 1)


def test_weak_form_for_pure_heat_flow_and_linearity():
    g = Grid(-6, 7, 1300)
    us, ts = heat_series(g)
    phi = TestFunction(0.5, 0.5, 0.2)
    r1 = weak_form_residual(us, ts, None, None, phi)
    r2 = weak_form_residual(us, ts, None, None, TestFunction(0.5, 0.5, 0.2, amplitude=2.0))
    assert r1 < 1e-4
    assert r2 == pytest.approx(2 * r1, rel=1e-9, abs=1e-15)


def test_weak_form_support_checks():
    g = Grid(-2, 3, 100)
    us, ts = heat_series(g, n=10)
    with pytest.raises(SupportEscapesGrid):
        weak_form_residual(us, ts, None, None, TestFunction(0.5, 1.0, 0.01))
    with pytest.raises(SupportEscapesGrid):
        weak_form_residual(us, ts, None, None, TestFunction(0.5, 0.1, 0.5))
