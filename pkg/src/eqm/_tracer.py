"""Compiled kernel following one trajectory of ``Q dz**2`` on a level of Re eta.

Status codes returned by :func:`trace_kernel`:
0 snapped to a critical point, 1 escaped to infinity, 2 runaway,
3 step underflow, 4 point buffer exhausted.
"""
import numpy as np
from numba import njit

SNAPPED, ESCAPED, RUNAWAY, UNDERFLOW, OVERFLOW = 0, 1, 2, 3, 4


@njit(cache=True)
def _horner(c, z):
    acc = 0j
    for i in range(len(c) - 1, -1, -1):
        acc = acc * z + c[i]
    return acc


@njit(cache=True)
def _deta(Qc, z, prev):
    """``-2 sqrt(Q(z))`` on the branch closest to ``prev``."""
    s = -2.0 * np.sqrt(_horner(Qc, z))
    if abs(s - prev) > abs(s + prev):
        return -s
    return s


_GX, _GW = np.polynomial.legendre.leggauss(6)
_GX = 0.5 * (_GX + 1.0)
_GW = 0.5 * _GW


@njit(cache=True)
def _gl_leg(Qc, z0, z1, d0, gx, gw):
    """``int eta'`` over the chord ``z0 -> z1`` with branch continuity from ``d0``."""
    acc = 0j
    prev = d0
    dz = z1 - z0
    for i in range(len(gx)):
        prev = _deta(Qc, z0 + gx[i] * dz, prev)
        acc += gw[i] * prev
    return acc * dz


@njit(cache=True)
def _dir(d, sgn):
    return sgn * 1j * np.conj(d) / abs(d)


@njit(cache=True)
def trace_kernel(Qc, crit, z0, d0, eta0, level, sgn, start, h0, hmin, hmax,
                 snap_r, r_esc, r_far, max_len, maxpts, gx=_GX, gw=_GW):
    """Follow ``Re eta = level`` from ``z0``.

    ``d0`` is ``eta'(z0)`` on the branch to follow; the unit tangent is
    ``sgn * i * conj(eta') / |eta'|``. ``start`` is the index of the launch
    critical point in ``crit`` (or -1); it is ignored for snapping until the
    path has moved ``4 * h0`` away from it.

    Returns ``(pts, n, status, node, eta_end)``.
    """
    pts = np.empty(maxpts, dtype=np.complex128)
    pts[0] = z0
    n = 1
    z = z0
    d = d0
    eta = eta0
    h = h0
    length = 0.0
    escaped = False
    left_start = start < 0
    ncrit = len(crit)
    while True:
        # distance to critical points
        dmin = 1e300
        imin = -1
        dall = 1e300
        for k in range(ncrit):
            dk = abs(z - crit[k])
            if dk < dall:
                dall = dk
            if k == start and not left_start:
                continue
            if dk < dmin:
                dmin = dk
                imin = k
        if start >= 0 and not left_start:
            if abs(z - crit[start]) > 4.0 * h0:
                left_start = True
        if imin >= 0 and dmin < snap_r:
            if n >= maxpts:
                return pts, n, OVERFLOW, -1, eta
            pts[n] = crit[imin]
            n += 1
            return pts, n, SNAPPED, imin, eta
        az = abs(z)
        if az > r_esc:
            escaped = True
        if escaped and az > r_far:
            return pts, n, ESCAPED, -1, eta
        if length > max_len:
            return pts, n, RUNAWAY, -1, eta
        hcap = hmax
        if escaped:
            hcap = 0.05 * az
        if 0.5 * dall < hcap:
            hcap = 0.5 * dall
        if h > hcap:
            h = hcap
        if escaped and h < 0.05 * az:
            h = 0.05 * az
        accepted = False
        while not accepted:
            if h < hmin:
                return pts, n, UNDERFLOW, -1, eta
            v = _dir(d, sgn)
            zm = z + 0.5 * h * v
            dm = _deta(Qc, zm, d)
            vm = _dir(dm, sgn)
            turn = abs(np.angle(vm / v))
            if turn > 0.08 and not escaped:
                h *= 0.5
                continue
            z1 = z + h * vm
            dz = z1 - z
            eta1 = eta + _gl_leg(Qc, z, z1, d, gx, gw)
            d1 = _deta(Qc, z1, dm)
            # transverse Newton correction onto the level set
            ad = abs(d1)
            delta = (level - eta1.real) * np.conj(d1) / (ad * ad)
            if abs(delta) > 0.2 * h and not escaped:
                h *= 0.5
                continue
            for _ in range(4):
                z1 = z1 + delta
                d1 = _deta(Qc, z1, d1)
                # re-integrate over the corrected chord; a linear update biases the level
                eta1 = eta + _gl_leg(Qc, z, z1, d, gx, gw)
                ad = abs(d1)
                delta = (level - eta1.real) * np.conj(d1) / (ad * ad)
                if abs(delta) < 1e-3 * hmin:
                    break
            accepted = True
            length += abs(z1 - z)
            z = z1
            d = d1
            eta = eta1
            if n >= maxpts:
                return pts, n, OVERFLOW, -1, eta
            pts[n] = z
            n += 1
            if turn < 0.02:
                h *= 1.5
