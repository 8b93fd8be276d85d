import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oralab.errors import GridMismatch, InsufficientMass
from oralab.grid import (DensityGrid, Grid, cut_extended, cut_interior, cut_left, cut_right, leq,
                         order_excess, r_left, r_right, tail_array, uniform_slab)

G = Grid(0.0, 4.0, 400)


def test_indicator_exact_mass_and_tail():
    u = G.indicator(0.5, 1.25, 2.0)
    assert u.total_mass == pytest.approx(1.5, abs=1e-14)
    tail = u.tail()
    assert tail(1.0) == pytest.approx(0.5)
    assert tail(-1.0) == pytest.approx(1.5)


def test_values_are_read_only_and_nonnegative():
    u = G.indicator(0, 1)
    with pytest.raises(ValueError):
        u.values[0] = 3.0
    with pytest.raises(ValueError):
        DensityGrid(G, -np.ones(G.n_cells))


def test_grid_mismatch():
    with pytest.raises(GridMismatch):
        G.indicator(0, 1) + Grid(0, 4, 401).indicator(0, 1)


def test_quantiles_of_uniform():
    u = G.indicator(1.0, 2.0)
    assert r_right(u, 0.25) == pytest.approx(1.75)
    assert r_left(u, 0.25) == pytest.approx(1.25)
    with pytest.raises(InsufficientMass):
        r_right(u, 2.0)


def test_cut_right_hand_oracle():
    # uniform on [1,2], remove the rightmost 0.3 -> kept is 1 on [1, 1.7]
    pair = cut_right(G.indicator(1.0, 2.0), 0.3)
    assert pair.kept.allclose(G.indicator(1.0, 1.7), atol=1e-12)
    assert pair.removed.allclose(G.indicator(1.7, 2.0), atol=1e-12)
    assert pair.position == pytest.approx(1.7)


def test_cut_interior_hand_oracle():
    # remove 0.2 lying just left of the 0.3-right-quantile: [1.5, 1.7]
    pair = cut_interior(G.indicator(1.0, 2.0), 0.3, 0.2)
    assert pair.removed.allclose(G.indicator(1.5, 1.7), atol=1e-12)
    assert pair.kept.total_mass == pytest.approx(0.8)


def test_cut_left_and_extended_dispatch():
    u = G.indicator(1.0, 2.0)
    assert cut_left(u, 0.4).kept.allclose(G.indicator(1.4, 2.0), atol=1e-12)
    assert cut_extended(u, -0.5, 0.2).kept.allclose(cut_right(u, 0.2).kept)
    assert cut_extended(u, 0.3, 0.2).kept.allclose(cut_interior(u, 0.3, 0.2).kept)
    assert cut_extended(u, 0.9, 0.2).kept.allclose(cut_left(u, 0.2).kept)


def test_fractional_cell_cut_is_exact_in_tail_space():
    u = G.from_function(lambda x: np.exp(-(x - 2) ** 2))
    d = 0.123456
    kept = cut_right(u, d).kept
    expect = np.clip(tail_array(u.values, G.h) - d, 0, None)
    assert np.max(np.abs(tail_array(kept.values, G.h) - expect)) < 1e-13


def test_uniform_slab_folds_outside_mass():
    s = uniform_slab(G, 3.5, 0.2)
    assert s.total_mass == pytest.approx(0.2, abs=1e-15)
    assert s.values[-1] > s.values[-60]


def test_leq_shift_and_slack():
    u = G.indicator(1.0, 2.0)
    v = G.indicator(1.5, 2.5)
    assert leq(u, v)
    assert not leq(v, u)
    assert leq(v, u, m=0.5)
    assert order_excess(v, u) == pytest.approx(0.5)


def test_reflection():
    u = G.indicator(1.0, 1.5)
    r = u.reflected()
    assert r.grid == Grid(-4.0, 0.0, 400)
    assert r.tail()(-1.5) == pytest.approx(0.5)


# property tests for the order laws ------------------------------------

H = Grid(-3.0, 3.0, 240)


@st.composite
def density_pair(draw):
    """u and a density v with u <= v (shift right plus added mass)."""
    k = draw(st.integers(1, 3))
    vals = np.zeros(H.n_cells)
    for _ in range(k):
        a = draw(st.floats(-2.0, 1.0))
        length = draw(st.floats(0.05, 1.0))
        w = draw(st.floats(0.1, 1.0))
        vals += w * H.overlap(a, a + length) / H.h
    shift = draw(st.integers(0, 30))
    v = np.zeros_like(vals)
    v[shift:] = vals[:vals.size - shift]
    extra = draw(st.floats(0.0, 0.5))
    if extra > 0:
        b = draw(st.floats(-2.0, 1.5))
        v += extra * H.overlap(b, b + 0.5) / 0.5 / H.h
    return DensityGrid(H, vals), DensityGrid(H, v)


@settings(max_examples=150, deadline=None)
@given(density_pair(), st.floats(0.01, 0.95))
def test_rightmost_cut_is_monotone(pair, frac):
    u, v = pair
    d = frac * u.total_mass
    assert leq(cut_right(u, d).kept, cut_right(v, d).kept)


@settings(max_examples=150, deadline=None)
@given(density_pair(), st.floats(0.01, 0.9), st.floats(0.01, 0.9))
def test_interior_cut_is_monotone(pair, a, b):
    u, v = pair
    Delta = a * u.total_mass * 0.5
    d = b * (u.total_mass - Delta) * 0.9
    assert leq(cut_interior(u, Delta, d).kept, cut_interior(v, Delta, d).kept)


@settings(max_examples=150, deadline=None)
@given(density_pair(), st.floats(-1.0, 3.0), st.floats(0.01, 0.9))
def test_extended_cut_is_monotone(pair, Delta, frac):
    u, v = pair
    d = frac * u.total_mass
    assert leq(cut_extended(u, Delta, d).kept, cut_extended(v, Delta, d).kept)


@settings(max_examples=150, deadline=None)
@given(density_pair(), st.floats(0.01, 0.9))
def test_left_cut_is_monotone_with_unequal_masses(pair, frac):
    u, v = pair
    d = frac * u.total_mass
    assert leq(cut_left(u, d).kept, cut_left(v, d).kept)


@settings(max_examples=100, deadline=None)
@given(density_pair(), st.floats(-1.0, 2.0), st.floats(0.0, 1.0), st.floats(0.01, 0.5))
def test_extended_cut_is_monotone_in_its_parameter(pair, Delta, lower_by, frac):
    u, _ = pair
    d = frac * u.total_mass
    assert leq(cut_extended(u, Delta - lower_by, d).kept, cut_extended(u, Delta, d).kept)
