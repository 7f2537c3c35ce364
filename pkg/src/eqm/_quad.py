"""Gauss-Legendre integration along straight legs in the complex plane.

Legs that start or end at a branch point of ``R`` carry an inverse-square-root
or square-root endpoint behaviour; a change of variables removes it so that
the Legendre rule converges spectrally.
"""
from __future__ import annotations

from functools import lru_cache

import numpy as np

from .errors import QuadratureStalled


@lru_cache(maxsize=None)
def gauss_legendre01(n: int):
    x, w = np.polynomial.legendre.leggauss(n)
    return 0.5 * (x + 1.0), 0.5 * w


def _leg_rule(z0, z1, sing0, sing1, n):
    u, w = gauss_legendre01(n)
    dz = z1 - z0
    if sing0 and sing1:
        th = np.pi * u
        half = 0.5 * dz
        s = 0.5 * (z0 + z1) - half * np.cos(th)
        jac = half * np.sin(th) * np.pi
    elif sing0:
        s = z0 + dz * u * u
        jac = 2.0 * dz * u
    elif sing1:
        s = z1 - dz * u * u
        jac = 2.0 * dz * u
    else:
        s = z0 + dz * u
        jac = np.full(n, dz, dtype=complex)
    return s, w * jac


def integrate_leg(f, z0, z1, sing0=False, sing1=False, *, tol=1e-13,
                  n=None, n0=16, nmax=1024):
    """Integrate ``f`` along the segment ``z0 -> z1``.

    ``f`` must accept a complex array. With ``n`` given a single fixed-order
    rule is applied; otherwise the order doubles from ``n0`` until two
    successive estimates agree to ``tol`` (relative to ``max(1, |I|)``).

    Returns ``(value, order_used)``.
    """
    z0 = complex(z0)
    z1 = complex(z1)
    if z0 == z1:
        return 0j, 0
    if n is not None:
        s, wj = _leg_rule(z0, z1, sing0, sing1, n)
        return complex(np.dot(wj, f(s))), n
    s, wj = _leg_rule(z0, z1, sing0, sing1, n0)
    prev = complex(np.dot(wj, f(s)))
    k = n0
    while k < nmax:
        k *= 2
        s, wj = _leg_rule(z0, z1, sing0, sing1, k)
        cur = complex(np.dot(wj, f(s)))
        if abs(cur - prev) <= tol * max(1.0, abs(cur)):
            return cur, k
        prev = cur
    raise QuadratureStalled(
        f"quadrature stalled on leg {z0:.6g} -> {z1:.6g} after {nmax} nodes")


def integrate_path(f, waypoints, sing_start=False, sing_end=False, **kw):
    """Integrate along a polyline; singular flags apply to its two ends only."""
    total = 0j
    nmax_used = 0
    last = len(waypoints) - 2
    for i in range(len(waypoints) - 1):
        val, n = integrate_leg(f, waypoints[i], waypoints[i + 1],
                               sing_start and i == 0, sing_end and i == last, **kw)
        total += val
        nmax_used = max(nmax_used, n)
    return total, nmax_used
