"""Equilibrium-measure artifacts: h, resolvent, density, g and the multiplier."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import integrate

from .errors import LagrangeExtractionFailed, OnCut
from .poly_core import (BranchedSqrtR, EndpointSet, Potential, horner,
                        laurent_inv_sqrt_R, poly_roots)

__all__ = [
    "HPolynomial", "EquilibriumMeasure", "GFunction", "series_at_infinity",
    "compute_h", "resolvent", "density_at", "g_value", "lagrange_multiplier",
    "verify_euler_lagrange", "resolvent_moments",
]


def default_order(pot: Potential, q: int) -> int:
    return 2 * pot.p + 2 * q + 8


def series_at_infinity(pot: Potential, ep: EndpointSet, n_neg=None):
    """Split ``V'(z) R(z)**(-1/2)`` into polynomial part and tail.

    Returns ``(h, c)`` with ``h`` the ascending coefficients of the polynomial
    part and ``c[k]`` the coefficient of ``z**(-k)`` (``c[0]`` unused).
    """
    q = ep.q
    if n_neg is None:
        n_neg = q + 2
    v = pot.vprime_coeffs
    deg_v = len(v) - 1
    N = max(default_order(pot, q), deg_v - q + n_neg + 1)
    d = laurent_inv_sqrt_R(ep, N).coeffs
    r = deg_v - q
    h = np.zeros(max(r, 0) + 1, dtype=complex)
    for m in range(r + 1):
        h[m] = sum(v[j] * d[j - q - m] for j in range(q + m, deg_v + 1))
    c = np.zeros(n_neg + 1, dtype=complex)
    for k in range(1, n_neg + 1):
        c[k] = sum(v[j] * d[j - q + k] for j in range(deg_v + 1) if 0 <= j - q + k <= N)
    return h, c


@dataclass(frozen=True)
class HPolynomial:
    """Monic density polynomial ``h`` of degree ``r = 2p - 1 - q``."""

    coeffs: np.ndarray
    zeros: np.ndarray

    @property
    def degree(self) -> int:
        return len(self.coeffs) - 1

    def __call__(self, z):
        return horner(self.coeffs, z)

    def derivative(self, z):
        return horner(np.polynomial.polynomial.polyder(self.coeffs), z)


def compute_h(pot: Potential, ep: EndpointSet) -> HPolynomial:
    """Polynomial part of ``V'/R**(1/2)`` at infinity, with its zeros."""
    h, _ = series_at_infinity(pot, ep, 1)
    # monic by construction; pin the leading coefficient against roundoff
    h = h.copy()
    h[-1] = 1.0
    return HPolynomial(h, poly_roots(h))


def resolvent_moments(pot: Potential, ep: EndpointSet, K: int) -> np.ndarray:
    """``m_0..m_K`` with ``omega(z) = sum_k m_k z**(-k-1)``.

    Exact from the Laurent tail: ``omega = (V' - h R**(1/2))/2`` and
    ``V'/R**(1/2) - h = sum c_k z**(-k)``, so ``omega = R**(1/2) * tail / 2``.
    """
    q = ep.q
    _, c = series_at_infinity(pot, ep, K + q + 1)
    # R^{1/2} = z^q * sum e_k z^{-k}
    e = np.polynomial.polynomial.polyfromroots(ep.points)[::-1]
    from .poly_core import _power_series_pow
    sq = _power_series_pow(np.asarray(e, dtype=complex), 0.5, K + q + 2)
    # omega z-power -(n) coefficient: 1/2 sum_{k} c_k * sq_{n - k + q}  (z^{q-k-j})
    m = np.zeros(K + 1, dtype=complex)
    for n in range(1, K + 2):
        acc = 0j
        for k in range(1, len(c)):
            j = n + q - k
            if 0 <= j < len(sq):
                acc += c[k] * sq[j]
        m[n - 1] = acc / 2
    return m


def resolvent(pot: Potential, ep: EndpointSet, h: HPolynomial, z, br=None):
    """``omega(z) = (V'(z) - h(z) R(z)**(1/2)) / 2`` off the cuts."""
    br = br or BranchedSqrtR(ep)
    z = complex(z)
    if br.on_chord(z) is not None:
        raise OnCut("on-cut; use side-resolved boundary values")
    return (pot.Vp(z) - h(z) * complex(br(z))) / 2


def _cut_polyline(em, j):
    if em.cut_polylines and j in em.cut_polylines:
        return np.asarray(em.cut_polylines[j])
    return np.array([em.ep.a[j], em.ep.b[j]])


@dataclass
class EquilibriumMeasure:
    """Bundle of a solved endpoint configuration and its density.

    ``cut_polylines`` maps a 0-based cut index to a traced arc from ``a_j``
    to ``b_j``; without it the straight segment is used.
    """

    pot: Potential
    ep: EndpointSet
    h: HPolynomial = None
    cut_polylines: dict = field(default_factory=dict)
    lagrange: complex = None
    orientation: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.h is None:
            self.h = compute_h(self.pot, self.ep)
        self.br = BranchedSqrtR(self.ep, self.cut_polylines or None)
        self.br_straight = BranchedSqrtR(self.ep)

    def cut_mass(self, j: int, tol=1e-13) -> complex:
        """``(1/2 pi i) * int_{a_j}^{b_j} h R_+^{1/2} ds`` along the chord."""
        from .endpoint_system import cut_integral
        return cut_integral(self.pot, self.ep, self.h, j + 1, tol=tol) / (2j * math.pi)

    def total_mass(self) -> complex:
        return sum(self.cut_mass(j) for j in range(self.ep.q))

    def density_samples(self, j: int, n: int = 64):
        """Interior points of cut ``j`` and the density there."""
        pl = _cut_polyline(self, j)
        seg = np.abs(np.diff(pl))
        s = np.concatenate([[0.0], np.cumsum(seg)])
        targets = s[-1] * (0.5 - 0.5 * np.cos(np.pi * (np.arange(n) + 0.5) / n))
        pts = np.interp(targets, s, pl.real) + 1j * np.interp(targets, s, pl.imag)
        return pts, np.array([density_at(self, j, z, check_excl=False) for z in pts])


def _tangent_on_polyline(pl, z):
    d = np.diff(pl)
    seg0 = pl[:-1]
    tpar = np.clip(((z - seg0) * np.conj(d)).real / np.abs(d) ** 2, 0, 1)
    dist = np.abs(seg0 + tpar * d - z)
    i = int(np.argmin(dist))
    return d[i] / abs(d[i]), dist[i]


def density_at(em: EquilibriumMeasure, j: int, s, *, excl=1e-8, check_excl=True,
               return_imag=False):
    """Density ``rho >= 0`` with ``d nu = rho |ds|`` at a point of cut ``j``.

    ``j`` is 0-based. On a traced arc the tangent is taken from the arc; on
    the straight segment the chord direction is used.
    """
    s = complex(s)
    a, b = em.ep.a[j], em.ep.b[j]
    if check_excl and min(abs(s - a), abs(s - b)) < excl:
        raise ValueError("point within the endpoint exclusion zone")
    if em.cut_polylines and j in em.cut_polylines:
        pl = np.asarray(em.cut_polylines[j])
        tang, _ = _tangent_on_polyline(pl, s)
        # "+" side: just left of the oriented arc
        eps = 1e-9 * (1 + abs(b - a))
        rp = complex(em.br(s + 1j * tang * eps))
    else:
        tang = (b - a) / abs(b - a)
        rp = complex(em.br_straight.boundary(s, "+"))
    val = em.h(s) * rp * tang / (2j * math.pi)
    sign = em.orientation.get(j)
    if sign is None:
        sign = 1.0 if val.real >= 0 else -1.0
        em.orientation[j] = sign
    val *= sign
    if return_imag:
        return val.real, val.imag
    return val.real


@dataclass
class GFunction:
    """``g(z) = (V(z) + l + eta(z)) / 2`` with ``eta`` from an evaluator."""

    em: EquilibriumMeasure
    evaluator: object = None

    def __post_init__(self):
        if self.evaluator is None:
            from .quad_diff import EtaEvaluator
            self.evaluator = EtaEvaluator(self.em.pot, self.em.ep, self.em.h, self.em.br)
        if self.em.lagrange is None:
            self.em.lagrange = lagrange_multiplier(self.em.pot, self.em.ep, self.em.h,
                                                   evaluator=self.evaluator)

    @property
    def base_point(self):
        return self.em.ep.b[-1]

    def __call__(self, z):
        return g_value(self, z)


def g_value(gf: GFunction, z):
    z = complex(z)
    return (gf.em.pot.V(z) + gf.em.lagrange + gf.evaluator.eta(z)) / 2


def _log_tail(m, z):
    return sum(m[k] / (k * z ** k) for k in range(1, len(m)))


def lagrange_multiplier(pot, ep, h, *, evaluator=None, radius=None, tol=1e-8, K=40):
    """``l = lim (2 log z - V(z) - eta(z))`` along the positive real direction.

    The ``O(1/z)`` remainder is removed exactly with the resolvent moments,
    ``g(z) = log z - sum_k m_k / (k z**k)``; the extraction is repeated at
    twice the radius and both values must agree to ``tol``.
    """
    if evaluator is None:
        from .quad_diff import EtaEvaluator
        evaluator = EtaEvaluator(pot, ep, h)
    m = resolvent_moments(pot, ep, K)
    rmax = max(abs(z) for z in ep.points)
    if radius is None:
        radius = 3.0 * (1.0 + rmax)
    vals = []
    for r in (radius, 2 * radius):
        z = complex(r, 0.0)
        g_asym = math.log(r) - _log_tail(m, z) - 0j
        vals.append(2 * g_asym - pot.V(z) - evaluator.eta(z))
    if abs(vals[0] - vals[1]) > tol * max(1.0, abs(vals[0])):
        raise LagrangeExtractionFailed(
            f"l extraction failed: {vals[0]} vs {vals[1]}")
    return vals[1]


def log_potential(em: EquilibriumMeasure, z, *, epsabs=1e-13, epsrel=1e-12):
    """``U(z) = -int log|z - s| d nu(s)`` by adaptive quadrature on each chord.

    Independent of the ``eta`` machinery. The complex density
    ``(1/2 pi i) h R_+**(1/2) ds`` is integrated along the straight chord with
    a logarithm branch whose cut leaves ``z`` away from the chord, which is
    equivalent to integrating over the curved support for ``z`` outside
    the region between chord and arc.
    """
    z = complex(z)
    total = 0.0
    for j in range(em.ep.q):
        a, b = em.ep.a[j], em.ep.b[j]
        mid, half = (a + b) / 2, (b - a) / 2
        out = z - mid
        w = (z - mid) / half
        on_chord = abs(w.imag) < 1e-12 and abs(w.real) <= 1
        if on_chord or abs(out) == 0:
            u_out = 1j * half / abs(half)
        else:
            u_out = out / abs(out)

        def f(theta):
            s = mid - half * math.cos(theta)
            rp = complex(em.br_straight.boundary(np.array([s]), "+")[0]) if abs(
                math.sin(theta)) > 0 else 0j
            dens = em.h(s) * rp / (2j * math.pi)
            ds = half * math.sin(theta)
            zs = s - z
            if zs == 0:
                return 0.0
            L = complex(np.log(zs / (-u_out))) if not on_chord else complex(math.log(abs(zs)), 0)
            return (L * dens * ds).real

        pts = None
        if on_chord:
            pts = [math.acos(max(-1.0, min(1.0, -w.real)))]
        val, _ = integrate.quad(f, 0.0, math.pi, points=pts, limit=400,
                                epsabs=epsabs, epsrel=epsrel)
        total += val
    return -total


def verify_euler_lagrange(em: EquilibriumMeasure, gf=None, probes_on=(), probes_off=(),
                          tol=1e-7):
    """Check the variational equality on the support and the strict inequality off it.

    ``U(z) + Re V(z) / 2`` is computed by direct quadrature of the log
    potential. Its spread over ``probes_on`` must be below ``tol`` and it
    must match ``-Re l / 2`` from the ``g``-function; on ``probes_off`` the
    margin over that constant must be positive.
    """
    on_vals = np.array([log_potential(em, z) + 0.5 * em.pot.V(complex(z)).real
                        for z in probes_on])
    ref = None
    if gf is not None:
        ref = -gf.em.lagrange.real / 2
    elif len(on_vals):
        ref = float(np.mean(on_vals))
    eq_dev = float(np.max(np.abs(on_vals - ref))) if len(on_vals) else 0.0
    margins = np.array([log_potential(em, z) + 0.5 * em.pot.V(complex(z)).real - ref
                        for z in probes_off])
    min_margin = float(margins.min()) if len(margins) else float("inf")
    return {
        "equality_ok": eq_dev <= tol,
        "equality_worst": eq_dev,
        "inequality_ok": bool(min_margin > 0),
        "inequality_worst_margin": min_margin,
        "constant": ref,
        "on_values": on_vals.tolist(),
        "off_margins": margins.tolist(),
    }
