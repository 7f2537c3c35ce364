import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from eqm.errors import OnCut
from eqm.measure import (EquilibriumMeasure, GFunction, compute_h, density_at,
                         lagrange_multiplier, resolvent, resolvent_moments,
                         series_at_infinity, verify_euler_lagrange)
from eqm.poly_core import EndpointSet, Potential

from conftest import regular_solution, semicircle_density


def test_semicircle_h_and_density(semicircle):
    pot, ep = semicircle
    h = compute_h(pot, ep)
    np.testing.assert_allclose(h.coeffs, [1.0], atol=1e-12)
    em = EquilibriumMeasure(pot, ep, h)
    for x in (-1.5, -0.2, 0.0, 0.9, 1.99):
        assert density_at(em, 0, x) == pytest.approx(semicircle_density(x), abs=1e-10)


def test_semicircle_moments_are_catalan(semicircle):
    pot, ep = semicircle
    m = resolvent_moments(pot, ep, 8)
    np.testing.assert_allclose(m, [1, 0, 1, 0, 2, 0, 5, 0, 14], atol=1e-10)


def test_resolvent_matches_stieltjes_transform(semicircle):
    pot, ep = semicircle
    h = compute_h(pot, ep)
    z = 0.7 + 1.3j
    # independent oracle: direct integral of the density
    from scipy import integrate
    re = integrate.quad(lambda x: (semicircle_density(x) / (z - x)).real, -2, 2)[0]
    im = integrate.quad(lambda x: (semicircle_density(x) / (z - x)).imag, -2, 2)[0]
    assert resolvent(pot, ep, h, z) == pytest.approx(complex(re, im), abs=1e-9)
    with pytest.raises(OnCut):
        resolvent(pot, ep, h, 0.5)


def test_quartic_one_cut_h(quartic_one_cut):
    pot, ep = quartic_one_cut
    b = ep.b[0]
    sigma = pot.t[1]
    h = compute_h(pot, ep)
    np.testing.assert_allclose(h.coeffs, [sigma + b * b / 2, 0, 1], atol=1e-10)
    assert h.degree == 2


def test_series_tail_normalisation(quartic_one_cut):
    pot, ep = quartic_one_cut
    _, c = series_at_infinity(pot, ep, 3)
    # T_0 hat = -c_1/2 = 0 and T_1 hat = -c_2/2 = -1 at a solution
    assert abs(c[1]) < 1e-10
    assert c[2] / 2 == pytest.approx(1.0, abs=1e-10)


def test_total_mass_is_one(quartic_one_cut):
    pot, ep = quartic_one_cut
    em = EquilibriumMeasure(pot, ep)
    assert em.total_mass() == pytest.approx(1.0, abs=1e-10)


def test_semicircle_lagrange_multiplier(semicircle):
    pot, ep = semicircle
    ell = lagrange_multiplier(pot, ep, compute_h(pot, ep))
    assert ell == pytest.approx(-1.0, abs=1e-8)


def test_euler_lagrange_quartic_complex(quartic_one_cut):
    pot, ep = quartic_one_cut
    em = EquilibriumMeasure(pot, ep)
    gf = GFunction(em)
    a, b = ep.a[0], ep.b[0]
    on = [a + (b - a) * s for s in (0.1, 0.37, 0.5, 0.8)]
    off = [2.5 * b, 2.5 * a, 3.0 * b]
    out = verify_euler_lagrange(em, gf, on, off)
    assert out["equality_ok"], out
    assert out["inequality_ok"], out


def test_density_exclusion_zone(semicircle):
    pot, ep = semicircle
    em = EquilibriumMeasure(pot, ep)
    with pytest.raises(ValueError):
        density_at(em, 0, ep.b[0] - 1e-10)


@pytest.mark.parametrize("sigma,q", [(1 + 1j, 1), (4j, 1), (-3, 2), (-1.35 + 4j, 3)])
def test_density_positive_on_traced_cuts(sigma, q):
    rep = regular_solution(sigma, q)
    em = EquilibriumMeasure(Potential.quartic(sigma), rep.endpoints,
                            cut_polylines=rep.graph.cut_polylines())
    for j in range(q):
        _, rho = em.density_samples(j, 24)
        assert np.all(rho > 0)
    assert em.total_mass() == pytest.approx(1.0, abs=1e-9)


@given(st.floats(0.02, 0.98))
def test_semicircle_density_property(x01):
    pot = Potential(1, (0,))
    em = EquilibriumMeasure(pot, EndpointSet(1, (-2,), (2,)))
    x = -2 + 4 * x01
    assert density_at(em, 0, x) == pytest.approx(semicircle_density(x), abs=1e-12)


def test_semicircle_density_integrates_to_one(semicircle):
    pot, ep = semicircle
    em = EquilibriumMeasure(pot, ep)
    from scipy import integrate
    val, _ = integrate.quad(lambda x: density_at(em, 0, x, check_excl=False), -2, 2)
    assert val == pytest.approx(1.0, abs=1e-9)
