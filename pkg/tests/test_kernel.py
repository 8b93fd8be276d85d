import warnings

import numpy as np
import pytest
from scipy.stats import norm

from oralab.errors import KernelWiderThanDomain, TruncationLoss
from oralab.grid import Grid, leq
from oralab.kernel import (InjectionSchedule, apply_kernel, convolve_values, inject,
                           injection_density, kernel_weights, mild_solution_residual, smear_atoms)
from oralab.measures import AtomList
from oralab.schedules import CumulativeSchedule

G = Grid(-5.0, 5.0, 2000)


def test_weights_normalized_and_symmetric():
    w = kernel_weights(0.01, G.h)
    assert w.sum() == pytest.approx(1.0, abs=1e-15)
    assert np.allclose(w, w[::-1])


def test_heat_flow_matches_scipy_normal():
    # independent oracle: cell averages of the N(0.3, t) density vs the kernel applied
    # to a narrow unit cell at 0.3 (second moment picks up h^2/12 from the cell)
    t = 0.05
    u = G.indicator(0.3 - G.h / 2, 0.3 + G.h / 2, 1.0 / G.h)
    out = apply_kernel(u, t)
    e = G.edges
    exact = np.diff(norm.cdf(e, loc=0.3, scale=np.sqrt(t + G.h ** 2 / 12))) / G.h
    assert np.max(np.abs(out.values - exact)) < 2e-3 * exact.max()
    assert out.total_mass == pytest.approx(1.0, abs=1e-13)


def test_fft_and_direct_agree():
    u = G.from_function(lambda x: np.exp(-x * x) * (x > -1))
    a = convolve_values(u.values, 0.2, G.h, "direct")
    b = convolve_values(u.values, 0.2, G.h, "fft")
    assert np.max(np.abs(a - b)) < 1e-12


def test_fold_keeps_mass_and_order():
    u = G.indicator(4.5, 5.0)
    v = G.indicator(4.8, 5.0, 2.5)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", KernelWiderThanDomain)
        gu, gv = apply_kernel(u, 0.5), apply_kernel(v, 0.5)
    assert gu.total_mass == pytest.approx(u.total_mass, abs=1e-13)
    assert leq(u, v) and leq(gu, gv)


def test_wide_kernel_warns():
    with pytest.warns(KernelWiderThanDomain):
        apply_kernel(G.indicator(0, 1), 1.0)


def test_smear_atoms_exact_weights():
    a = AtomList.from_pairs([(0.0, 0.25), (1.0, 0.75)])
    s = smear_atoms(a, G, 0.01)
    assert s.total_mass == pytest.approx(1.0, abs=1e-13)
    assert s.tail()(0.5) == pytest.approx(0.75, abs=1e-6)


def test_smear_near_edge_warns():
    with pytest.warns(TruncationLoss):
        smear_atoms(AtomList.point(4.95), G, 0.01)


def test_injection_density_mass_is_increment():
    sched = InjectionSchedule(CumulativeSchedule.power(1.0, 0.5), atoms=AtomList.point(0.0))
    d = injection_density(G, sched, 0.1, 0.3, sub_steps=4)
    assert d.total_mass == pytest.approx(np.sqrt(0.3) - np.sqrt(0.1), abs=1e-13)


def test_injection_requires_unit_mass():
    with pytest.raises(ValueError):
        InjectionSchedule(CumulativeSchedule.linear(1.0), atoms=AtomList.point(0.0, 0.5))
    with pytest.raises(ValueError):
        InjectionSchedule(CumulativeSchedule.linear(1.0))


def test_inject_adds_mass():
    sched = InjectionSchedule(CumulativeSchedule.linear(2.0), atoms=AtomList.point(0.5))
    u = inject(G.indicator(0, 1), sched, 0.0, 0.1)
    assert u.total_mass == pytest.approx(1.2)


def test_mild_solution_of_pure_heat_flow():
    from oralab.measures import RemovalMeasure
    u0 = G.indicator(-0.5, 0.5)
    res = mild_solution_residual(u0, RemovalMeasure(), InjectionSchedule.none(), apply_kernel(u0, 0.1), 0.1)
    assert res == 0.0
