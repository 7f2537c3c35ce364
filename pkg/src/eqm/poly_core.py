"""Polynomial substrate: potentials, endpoint sets, the branched root of R.

Coefficient arrays are stored in *ascending* order (``c[k]`` multiplies
``z**k``), matching :mod:`numpy.polynomial.polynomial`.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from numpy.polynomial import polynomial as npoly

from .errors import NotOnCut

__all__ = [
    "Potential", "EndpointSet", "LaurentTail", "BranchedSqrtR",
    "eval_V", "eval_V_prime", "laurent_inv_sqrt_R", "eval_sqrt_R",
    "poly_roots", "horner",
]


def horner(coeffs, z):
    """Evaluate an ascending-order polynomial at ``z`` (scalar or array)."""
    acc = 0j if np.isscalar(z) else np.zeros_like(np.asarray(z, dtype=complex))
    for c in reversed(coeffs):
        acc = acc * z + c
    return acc


@dataclass(frozen=True)
class Potential:
    """External field ``V(z) = z**(2p)/(2p) + sum_j t_j z**j / j``.

    Parameters
    ----------
    p : int
        Half degree, ``p >= 1``.
    t : sequence of complex
        ``t_1 .. t_{2p-1}``.
    """

    p: int
    t: tuple

    def __post_init__(self):
        if int(self.p) != self.p or self.p < 1:
            raise ValueError("p must be a positive integer")
        t = tuple(complex(x) for x in self.t)
        if len(t) != 2 * self.p - 1:
            raise ValueError(f"expected {2 * self.p - 1} coefficients, got {len(t)}")
        object.__setattr__(self, "t", t)

    @classmethod
    def quartic(cls, sigma):
        """``V = z**4/4 + sigma z**2/2``."""
        return cls(2, (0, sigma, 0))

    @property
    def degree(self) -> int:
        return 2 * self.p

    @property
    def vprime_coeffs(self) -> np.ndarray:
        c = np.zeros(2 * self.p, dtype=complex)
        c[: 2 * self.p - 1] = self.t
        c[-1] = 1.0
        return c

    @property
    def v_coeffs(self) -> np.ndarray:
        c = np.zeros(2 * self.p + 1, dtype=complex)
        for j, tj in enumerate(self.t, start=1):
            c[j] = tj / j
        c[-1] = 1.0 / (2 * self.p)
        return c

    def V(self, z):
        return horner(self.v_coeffs, z)

    def Vp(self, z):
        return horner(self.vprime_coeffs, z)

    def with_t(self, t):
        return Potential(self.p, tuple(t))

    def scale(self) -> float:
        """Rough length scale of the problem (max root modulus bound of V')."""
        return 1.0 + max(abs(x) ** (1.0 / (2 * self.p - j)) for j, x in enumerate(self.t, start=1))


def eval_V_prime(pot: Potential, z):
    return pot.Vp(z)


def eval_V(pot: Potential, z):
    return pot.V(z)


@dataclass(frozen=True)
class EndpointSet:
    """Branch points ``a_1..a_q``, ``b_1..b_q`` in traversal order.

    ``order`` records the permutation that took the originally supplied
    labels to this traversal order; it is carried along for bookkeeping.
    """

    q: int
    a: tuple
    b: tuple
    order: tuple = field(default=())

    def __post_init__(self):
        a = tuple(complex(x) for x in self.a)
        b = tuple(complex(x) for x in self.b)
        if len(a) != self.q or len(b) != self.q or self.q < 1:
            raise ValueError("endpoint arrays must both have length q >= 1")
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "b", b)
        if not self.order:
            object.__setattr__(self, "order", tuple(range(2 * self.q)))

    @classmethod
    def from_points(cls, pts):
        """Label ``2q`` points by ascending real part (ties by imaginary part)."""
        pts = sorted((complex(z) for z in pts), key=lambda z: (z.real, z.imag))
        if len(pts) % 2:
            raise ValueError("need an even number of points")
        return cls(len(pts) // 2, pts[0::2], pts[1::2])

    @classmethod
    def from_vector(cls, x, q):
        """Inverse of :meth:`to_vector`."""
        x = np.asarray(x, dtype=float)
        a = x[0:2 * q:2] + 1j * x[1:2 * q:2]
        b = x[2 * q::2] + 1j * x[2 * q + 1::2]
        return cls(q, tuple(a), tuple(b))

    def to_vector(self) -> np.ndarray:
        """``(Re a1, Im a1, ..., Re aq, Im aq, Re b1, Im b1, ..., Im bq)``."""
        x = np.empty(4 * self.q)
        a = np.asarray(self.a)
        b = np.asarray(self.b)
        x[0:2 * self.q:2] = a.real
        x[1:2 * self.q:2] = a.imag
        x[2 * self.q::2] = b.real
        x[2 * self.q + 1::2] = b.imag
        return x

    @property
    def points(self) -> np.ndarray:
        return np.array(self.a + self.b)

    @property
    def interleaved(self) -> list:
        """``[a1, b1, a2, b2, ...]``."""
        out = []
        for ak, bk in zip(self.a, self.b):
            out += [ak, bk]
        return out

    @property
    def R_coeffs(self) -> np.ndarray:
        return npoly.polyfromroots(self.points).astype(complex)

    def min_separation(self) -> float:
        pts = self.points
        d = np.abs(pts[:, None] - pts[None, :])
        d[np.diag_indices_from(d)] = np.inf
        return float(d.min())

    def relabeled(self, perm):
        """Return a copy whose interleaved list is ``[old[i] for i in perm]``."""
        inter = self.interleaved
        new = [inter[i] for i in perm]
        return EndpointSet(self.q, new[0::2], new[1::2], tuple(perm))

    def negated(self):
        """Image under ``z -> -z``, relabelled in traversal order."""
        inter = [-z for z in reversed(self.interleaved)]
        return EndpointSet(self.q, inter[0::2], inter[1::2])


@dataclass(frozen=True)
class LaurentTail:
    """``f(z) = z**m * sum_k coeffs[k] z**(-k)`` truncated at ``N``."""

    coeffs: np.ndarray
    m: int

    @property
    def N(self) -> int:
        return len(self.coeffs) - 1

    def __call__(self, z):
        w = 1.0 / np.asarray(z, dtype=complex)
        return np.asarray(z, dtype=complex) ** self.m * horner(self.coeffs, w)


def _power_series_pow(g, alpha, N):
    """Coefficients of ``(1 + g1 w + g2 w**2 + ...)**alpha`` up to ``w**N``.

    Uses the classical recurrence ``n f_n = sum_k ((alpha+1) k - n) g_k f_{n-k}``.
    """
    f = np.zeros(N + 1, dtype=complex)
    f[0] = 1.0
    G = len(g) - 1
    for n in range(1, N + 1):
        acc = 0j
        for k in range(1, min(n, G) + 1):
            acc += ((alpha + 1.0) * k - n) * g[k] * f[n - k]
        f[n] = acc / n
    return f


def laurent_inv_sqrt_R(ep: EndpointSet, N: int) -> LaurentTail:
    """Expansion of ``R(z)**(-1/2) = z**(-q) (1 + d1/z + d2/z**2 + ...)``.

    The normalisation matches :class:`BranchedSqrtR` (``R**(1/2) ~ z**q``).
    """
    rc = ep.R_coeffs
    # R(z) = z^{2q} * sum_k rc[2q-k] w^k, w = 1/z
    g = rc[::-1].copy()
    return LaurentTail(_power_series_pow(g, -0.5, N), -ep.q)


class BranchedSqrtR:
    """Branch of ``R(z)**(1/2)`` normalised by ``R**(1/2) ~ z**q`` at infinity.

    Each factor ``((z-a_k)(z-b_k))**(1/2)`` jumps across the straight segment
    ``a_k -> b_k`` unless a polyline for cut ``k`` is supplied in
    ``polylines``; the jump then moves onto that polyline (its first and
    last vertices must be ``a_k`` and ``b_k``). The "+" boundary value is the
    one approached from the left of the oriented cut.
    """

    def __init__(self, ep: EndpointSet, polylines=None, snap_tol=1e-9):
        self.ep = ep
        self.mid = np.array([(a + b) / 2 for a, b in zip(ep.a, ep.b)])
        self.half = np.array([(b - a) / 2 for a, b in zip(ep.a, ep.b)])
        self.snap_tol = snap_tol
        self.polylines = {}
        self._paths = {}
        for k, pl in (polylines or {}).items():
            self.set_polyline(k, pl)

    def set_polyline(self, k, polyline):
        from matplotlib.path import Path

        pl = np.asarray(polyline, dtype=complex)
        if abs(pl[0] - self.ep.a[k]) > 1e-6 * (1 + abs(self.ep.a[k])):
            pl = pl[::-1]
        pl = pl.copy()
        pl[0], pl[-1] = self.ep.a[k], self.ep.b[k]
        self.polylines[k] = pl
        ring = np.concatenate([pl, pl[:1]])
        self._paths[k] = Path(np.column_stack([ring.real, ring.imag]), closed=True)

    def with_polylines(self, polylines):
        return BranchedSqrtR(self.ep, polylines, self.snap_tol)

    def _factor(self, k, z):
        # adding 0j clears a negative zero imaginary part, which would otherwise
        # split the branch between the two square roots on the chord's extension
        w = (z - self.mid[k]) / self.half[k] + 0j
        f = self.half[k] * np.sqrt(w - 1.0) * np.sqrt(w + 1.0)
        if k in self._paths:
            zz = np.atleast_1d(z)
            inside = self._paths[k].contains_points(np.column_stack([zz.real, zz.imag]))
            sgn = np.where(inside, -1.0, 1.0)
            f = f * (sgn if np.ndim(z) else sgn[0])
        return f

    def __call__(self, z):
        z = np.asarray(z, dtype=complex) if not np.isscalar(z) else complex(z)
        out = 1.0 + 0j if np.isscalar(z) else np.ones_like(z)
        for k in range(self.ep.q):
            out = out * self._factor(k, z)
        return out

    def on_chord(self, z):
        """Index of the straight cut segment containing ``z`` (or ``None``)."""
        for k in range(self.ep.q):
            w = (z - self.mid[k]) / self.half[k]
            if abs(w.imag) <= self.snap_tol and abs(w.real) < 1.0:
                return k
        return None

    def boundary(self, z, side="+"):
        """Boundary value on a straight cut segment (vectorised in ``z``).

        All points must lie on the same segment ``k``.
        """
        z = np.asarray(z, dtype=complex)
        zs = np.atleast_1d(z)
        k = self.on_chord(complex(zs.flat[0]))
        if k is None or k in self._paths:
            raise NotOnCut("not on cut")
        x = ((zs - self.mid[k]) / self.half[k]).real
        sgn = 1.0 if side == "+" else -1.0
        val = sgn * 1j * self.half[k] * np.sqrt(np.clip(1.0 - x * x, 0.0, None))
        for j in range(self.ep.q):
            if j != k:
                val = val * self._factor(j, zs)
        return val if z.ndim else complex(val[0])


def eval_sqrt_R(br: BranchedSqrtR, z, side="auto"):
    """Branch-consistent ``R**(1/2)`` at ``z``; ``side`` in ``{'auto', '+', '-'}``."""
    z = complex(z)
    if any(z == p for p in br.ep.points):
        return 0j
    if side == "auto":
        return complex(br(z))
    if side not in ("+", "-"):
        raise ValueError("side must be 'auto', '+' or '-'")
    k = br.on_chord(z)
    if k is not None and k not in br._paths:
        return complex(br.boundary(z, side))
    for k, pl in br.polylines.items():
        seg0, seg1 = pl[:-1], pl[1:]
        d = seg1 - seg0
        tpar = np.clip(((z - seg0) * np.conj(d)).real / np.abs(d) ** 2, 0, 1)
        dist = np.abs(seg0 + tpar * d - z)
        i = int(np.argmin(dist))
        if dist[i] <= br.snap_tol * (1 + abs(z)):
            tang = d[i] / abs(d[i])
            eps = 1e-9 * (1 + abs(br.half[k]))
            sgn = 1.0 if side == "+" else -1.0
            return complex(br(z + sgn * 1j * tang * eps))
    raise NotOnCut("not on cut")


def poly_roots(coeffs: Sequence[complex]) -> np.ndarray:
    """All complex roots (with multiplicity) of an ascending-order polynomial.

    Companion-matrix eigenvalues followed by one Newton polish per root.
    A constant polynomial has no roots.
    """
    c = np.trim_zeros(np.asarray(coeffs, dtype=complex), "b")
    if len(c) <= 1:
        if len(c) == 0:
            raise ValueError("zero polynomial")
        return np.zeros(0, dtype=complex)
    r = np.roots(c[::-1]).astype(complex)
    dc = npoly.polyder(c)
    for i, z in enumerate(r):
        fz = horner(c, z)
        dz = horner(dc, z)
        if dz != 0:
            z1 = z - fz / dz
            if abs(horner(c, z1)) <= abs(fz):
                r[i] = z1
    return r
