import numpy as np
import pytest

from oralab.grid import Grid
from oralab.metrics import Tail, jump_aware_grid, levy_distance, tail_sup_distance
from oralab.particles import EmpiricalTail

G = Grid(-2, 3, 500)


def brute_levy(Fa, Fb, x, eps_grid):
    """Smallest eps on a dense grid satisfying both Levy inequalities."""
    for eps in eps_grid:
        if np.all(Fa(x - eps) - eps <= Fb(x) + 1e-12) and np.all(Fb(x) <= Fa(x + eps) + eps + 1e-12):
            return eps
    return np.inf


def test_levy_uniform_shift_against_brute_force():
    a, b = G.indicator(0, 1).tail(), G.indicator(0.2, 1.2).tail()
    got = levy_distance(a, b)
    assert got == pytest.approx(0.1, abs=1e-6)
    F = lambda lo: (lambda x: np.clip(np.asarray(x) - lo, 0, 1))
    x = np.linspace(-2, 3, 5001)
    assert brute_levy(F(0.0), F(0.2), x, np.arange(0, 0.5, 1e-4)) == pytest.approx(got, abs=2e-4)


def test_identical_inputs():
    t = G.indicator(0, 1).tail()
    assert levy_distance(t, t) == 0.0
    assert tail_sup_distance(t, t) == 0.0


def test_tail_sup_of_shifted_indicators():
    assert tail_sup_distance(G.indicator(0, 1).tail(), G.indicator(0.5, 1.5).tail()) == pytest.approx(0.5)


def test_point_mass_shift():
    a = EmpiricalTail(np.array([0.0]), 1)
    b = EmpiricalTail(np.array([0.3]), 1)
    assert tail_sup_distance(a, b) == 1.0
    assert levy_distance(a, b) == pytest.approx(0.3, abs=1e-8)
    assert levy_distance(a, EmpiricalTail(np.array([2.0]), 1)) == pytest.approx(1.0, abs=1e-8)


def test_tail_wrapper_needs_grid():
    t = Tail(lambda r: np.where(np.asarray(r) <= 0, 1.0, 0.0), 1.0)
    with pytest.raises(ValueError):
        jump_aware_grid(t)
    assert tail_sup_distance(t, t, r_grid=[0.0, 1.0]) == 0.0
