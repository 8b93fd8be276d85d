import math

import numpy as np
import pytest

from oralab.schedules import (CumulativeSchedule, QuantileSchedule, ceil_conv, epsilon0,
                              floor_count)


def test_linear_and_piecewise_values():
    s = CumulativeSchedule.linear(2.0)
    assert s(0.25) == pytest.approx(0.5)
    p = CumulativeSchedule.piecewise([0, 1, 2], [0, 1, 1.5])
    assert p(np.array([0.5, 1.5, 3.0])) == pytest.approx([0.5, 1.25, 2.0])  # last slope continued


def test_power_and_capped():
    assert CumulativeSchedule.power(2.0, 0.5)(0.25) == pytest.approx(1.0)
    c = CumulativeSchedule.capped(cap=0.3, scale=2.0)
    assert c(np.array([0.1, 0.3, 0.9])) == pytest.approx([0.2, 0.6, 0.6])


def test_rejects_bad_schedules():
    with pytest.raises(ValueError):
        CumulativeSchedule.piecewise([0, 1], [0, -1])
    with pytest.raises(ValueError):
        CumulativeSchedule.linear(-1)
    with pytest.raises(ValueError):
        CumulativeSchedule("cubic")


@pytest.mark.parametrize("S", [CumulativeSchedule.linear(1.0), CumulativeSchedule.power(1.0, 0.5),
                               CumulativeSchedule.piecewise([0, 0.3, 1], [0, 0.6, 0.7])])
def test_counting_times_are_floor_exact(S):
    N = 997
    count = int(floor_count(N, S(1.0)))
    t = S.counting_times(N, count)
    k = np.arange(1, count + 1)
    assert np.all(np.floor(N * S(t)) >= k)
    prev = np.nextafter(t, -np.inf)
    assert np.all(np.floor(N * S(np.clip(prev, 0, None))) < k)
    assert np.all(np.diff(t) >= 0)


def test_count_formula_N100():
    # N + floor(N I_t) at t = 0.5 with I_t = t
    I = CumulativeSchedule.linear(1.0)
    assert 100 + int(floor_count(100, I(0.5))) == 150


def test_epsilon0():
    I = CumulativeSchedule.linear(1.0)
    J = CumulativeSchedule.linear(2.0)
    assert epsilon0(I, J, 0.5) == pytest.approx(0.5)


def test_config_roundtrip():
    for s in [CumulativeSchedule.linear(1.5), CumulativeSchedule.power(1, 2),
              CumulativeSchedule.piecewise([0, 1], [0, 2]), CumulativeSchedule.capped(0.4, 3)]:
        assert CumulativeSchedule.from_config(s.to_config()) == s


def test_ceil_convention():
    assert ceil_conv(0.0) == 1
    assert ceil_conv(1.5) == 2
    assert ceil_conv(2.0) == 2


def test_quantile_schedule_q_and_Q():
    qs = QuantileSchedule.constant_Q(0.5)
    assert qs.q(0.2) == pytest.approx(0.4)
    assert qs.Q(0.2) == pytest.approx(0.5)
    assert qs.q(1.0) == 0.0
    r = qs.reflected()
    assert r.q(0.2) == pytest.approx(1 - 0.2 - 0.4)


def test_quantile_bounds_exact_vertex():
    # Q linear from 0 to 1 gives q(t) = (1-t) t, maximal at t = 1/2
    qs = QuantileSchedule("Q_piecewise_linear", (0.0, 1.0), (0.0, 1.0))
    lo, hi = qs.bounds(0.3, 0.7)
    assert hi == pytest.approx(0.25)
    assert lo == pytest.approx(0.21)


def test_quantile_validation():
    with pytest.raises(ValueError):
        QuantileSchedule("q_piecewise_linear", (0.0, 1.0), (0.0, 0.5)).validate()
    QuantileSchedule.constant_Q(1.0).validate()


def test_callable_bounds_close_to_dense():
    qs = QuantileSchedule("callable", func=lambda t: 0.25 * (1 - t) * (1 + math.sin(6 * t)) / 2)
    lo, hi = qs.bounds(0.0, 0.9)
    t = np.linspace(0, 0.9, 200001)
    v = qs.q(t)
    assert lo == pytest.approx(v.min(), abs=1e-9)
    assert hi == pytest.approx(v.max(), abs=1e-9)
