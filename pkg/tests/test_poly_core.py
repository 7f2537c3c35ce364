import numpy as np
import pytest
from hypothesis import assume, given
from hypothesis import strategies as st

from eqm.errors import NotOnCut
from eqm.poly_core import (BranchedSqrtR, EndpointSet, Potential, _power_series_pow,
                           eval_sqrt_R, horner, laurent_inv_sqrt_R, poly_roots)

finite = st.floats(-3, 3, allow_nan=False, allow_infinity=False)
cplx = st.builds(complex, finite, finite)


def _separated(pts, min_sep=0.2):
    pts = np.asarray(pts)
    d = np.abs(pts[:, None] - pts[None, :]) + np.eye(len(pts)) * 10
    return d.min() > min_sep


def test_potential_validation():
    with pytest.raises(ValueError):
        Potential(0, ())
    with pytest.raises(ValueError):
        Potential(2, (0, 1))
    assert Potential.quartic(1j).t == (0j, 1j, 0j)


@given(st.lists(cplx, min_size=3, max_size=3), cplx)
def test_vprime_is_derivative_of_v(t, z):
    pot = Potential(2, tuple(t))
    dv = np.polynomial.polynomial.polyder(pot.v_coeffs)
    assert abs(pot.Vp(z) - horner(dv, z)) <= 1e-10 * (1 + abs(pot.Vp(z)))


def test_semicircle_potential_values():
    pot = Potential(1, (0,))
    assert pot.V(2.0) == pytest.approx(2.0)
    assert pot.Vp(3j) == pytest.approx(3j)


@given(st.lists(cplx, min_size=6, max_size=6))
def test_endpoint_vector_roundtrip(pts):
    ep = EndpointSet(3, pts[:3], pts[3:])
    back = EndpointSet.from_vector(ep.to_vector(), 3)
    assert back.a == ep.a and back.b == ep.b


def test_from_points_orders_by_real_part():
    ep = EndpointSet.from_points([2, -1j, -2, 1 + 1j])
    assert ep.a == (-2, 1 + 1j) and ep.b == (-1j, 2)


def test_negated_is_involution():
    ep = EndpointSet(2, (-2 + 0.1j, 0.5), (-1, 2 - 0.3j))
    back = ep.negated().negated()
    np.testing.assert_allclose(back.points, ep.points)


@given(st.lists(cplx, min_size=4, max_size=4), cplx)
def test_sqrt_squares_to_R(pts, z):
    assume(_separated(pts))
    ep = EndpointSet(2, pts[:2], pts[2:])
    br = BranchedSqrtR(ep)
    R = horner(ep.R_coeffs, z)
    assert abs(br(z) ** 2 - R) <= 1e-9 * (1 + abs(R))


def test_sqrt_normalised_at_infinity():
    ep = EndpointSet(2, (-2, 0.3j), (-0.5, 1.5 + 0.2j))
    z = 1e4 * np.exp(0.7j)
    assert abs(BranchedSqrtR(ep)(z) / z ** 2 - 1) < 1e-3


def test_boundary_values_jump():
    ep = EndpointSet(1, (-2,), (2,))
    br = BranchedSqrtR(ep)
    x = 0.3
    plus = br.boundary(x, "+")
    minus = br.boundary(x, "-")
    assert plus == pytest.approx(-minus)
    # the "+" value is the limit from the left of -2 -> 2, i.e. from above
    assert plus == pytest.approx(complex(br(x + 1e-12j)), abs=1e-6)
    assert abs(plus) == pytest.approx(np.sqrt(4 - x * x))
    with pytest.raises(NotOnCut):
        eval_sqrt_R(br, 0.3 + 0.5j, "+")


def test_polyline_moves_the_jump():
    ep = EndpointSet(1, (-1,), (1,))
    arc = np.exp(1j * np.linspace(np.pi, 0, 200))  # upper half circle
    br = BranchedSqrtR(ep, {0: arc})
    straight = BranchedSqrtR(ep)
    # between chord and arc the two branches differ by sign
    z = 0.5j
    assert complex(br(z)) == pytest.approx(-complex(straight(z)))
    assert complex(br(-0.5j)) == pytest.approx(complex(straight(-0.5j)))


@given(st.lists(cplx, min_size=4, max_size=4))
def test_laurent_tail_matches_direct_evaluation(pts):
    assume(_separated(pts))
    ep = EndpointSet(2, pts[:2], pts[2:])
    tail = laurent_inv_sqrt_R(ep, 60)
    z = 8.0 * (1 + max(abs(p) for p in pts)) * np.exp(0.3j)
    direct = 1 / complex(BranchedSqrtR(ep)(z))
    assert abs(tail(z) - direct) <= 1e-10 * abs(direct)


def test_power_series_pow_binomial():
    # (1 + w)**0.5 has binomial coefficients
    f = _power_series_pow(np.array([1, 1], dtype=complex), 0.5, 4)
    np.testing.assert_allclose(f.real, [1, 0.5, -0.125, 0.0625, -0.0390625])


@given(st.lists(cplx, min_size=1, max_size=6))
def test_poly_roots_reconstruct(roots):
    c = np.polynomial.polynomial.polyfromroots(roots)
    got = poly_roots(c)
    assert len(got) == len(roots)
    for r in roots:
        assert abs(horner(c, r)) < 1e-6 * (1 + np.max(np.abs(c)))
    for r in got:
        assert abs(horner(c, r)) < 1e-6 * (1 + np.max(np.abs(c)))
