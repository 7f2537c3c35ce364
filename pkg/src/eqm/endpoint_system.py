"""The 4q real endpoint equations and their Newton solution."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from ._quad import integrate_leg, integrate_path
from .errors import (BoundaryReached, CoalescingEndpoints, GapPathBlocked,
                     NearSingularSystem, NoConvergence, QuadratureStalled,
                     SolverError)
from .measure import compute_h, series_at_infinity
from .poly_core import BranchedSqrtR, EndpointSet, Potential

__all__ = [
    "SolveOptions", "ResidualVector", "SolveReport", "ContinuationPolicy",
    "ContinuationPath", "moment", "moments", "cut_integral", "gap_integral",
    "gap_path", "residual", "solve_endpoints", "continue_in_t", "jacobian",
]


@dataclass(frozen=True)
class SolveOptions:
    newton_tol: float = 1e-11
    max_iter: int = 50
    quad_tol: float = 1e-13
    fd_h: float = 1e-7
    cond_max: float = 1e12
    coalesce_tol: float = 1e-8
    max_halvings: int = 30


def moment(pot: Potential, ep: EndpointSet, ell: int) -> complex:
    """Normalised moment ``T_ell / (2 pi i)``, exact from the Laurent tail.

    The regular conditions read ``T_ell = 0`` for ``ell < q`` and ``T_q = -1``.
    """
    if not 0 <= ell <= ep.q:
        raise ValueError(f"moment index {ell} outside 0..{ep.q}")
    _, c = series_at_infinity(pot, ep, ep.q + 1)
    return -c[ell + 1] / 2


def moments(pot: Potential, ep: EndpointSet) -> np.ndarray:
    _, c = series_at_infinity(pot, ep, ep.q + 1)
    return -c[1:ep.q + 2] / 2


def _hR(h, br):
    return lambda s: h(s) * br(s)


def cut_integral(pot, ep, h, j, *, br=None, tol=1e-13, n=None, return_order=False):
    """``int_{a_j}^{b_j} h R_+**(1/2) ds`` along the straight chord (``j`` 1-based)."""
    if not 1 <= j <= ep.q:
        raise ValueError(f"cut index {j} outside 1..{ep.q}")
    br = br or BranchedSqrtR(ep)
    k = j - 1
    a, b = ep.a[k], ep.b[k]
    mid, half = br.mid[k], br.half[k]

    def f(s):
        x = ((s - mid) / half).real
        val = 1j * half * np.sqrt(np.clip(1.0 - x * x, 0.0, None))
        for i in range(ep.q):
            if i != k:
                val = val * br._factor(i, s)
        return h(s) * val

    val, order = integrate_leg(f, a, b, True, True, tol=tol, n=n)
    return (val, order) if return_order else val


def _segments_cross(p0, p1, q0, q1, eps=1e-12):
    """Proper intersection of two closed segments, ignoring shared endpoints."""
    d1 = p1 - p0
    d2 = q1 - q0
    den = (np.conj(d1) * d2).imag
    if abs(den) < eps * abs(d1) * abs(d2):
        # parallel; treat collinear overlap as crossing
        if abs((np.conj(d1) * (q0 - p0)).imag) > eps * abs(d1) * (1 + abs(q0 - p0)):
            return False
        t0 = ((q0 - p0) * np.conj(d1)).real / abs(d1) ** 2
        t1 = ((q1 - p0) * np.conj(d1)).real / abs(d1) ** 2
        lo, hi = min(t0, t1), max(t0, t1)
        return hi > eps and lo < 1 - eps
    w = q0 - p0
    t = (np.conj(w) * d2).imag / den
    u = (np.conj(w) * d1).imag / den
    return eps < t < 1 - eps and eps < u < 1 - eps


def _polyline_clear(pts, chords):
    for i in range(len(pts) - 1):
        for (c0, c1) in chords:
            if _segments_cross(pts[i], pts[i + 1], c0, c1):
                return False
    return True


def gap_path(ep: EndpointSet, j: int, polylines=None):
    """Waypoints from ``b_j`` to ``a_{j+1}`` avoiding every cut (``j`` 1-based)."""
    if not 1 <= j <= ep.q - 1:
        raise ValueError(f"gap index {j} outside 1..{ep.q - 1}")
    chords = []
    for k in range(ep.q):
        pl = (polylines or {}).get(k)
        pts = np.asarray(pl) if pl is not None else np.array([ep.a[k], ep.b[k]])
        chords += list(zip(pts[:-1], pts[1:]))
    z0, z1 = ep.b[j - 1], ep.a[j]
    if _polyline_clear([z0, z1], chords):
        return [z0, z1]
    mid = (z0 + z1) / 2
    nrm = 1j * (z1 - z0)
    scale = max(abs(z1 - z0), max(abs(c1 - c0) for c0, c1 in chords))
    for frac in (0.25, 0.5, 1.0, 1.5, 2.0, 3.0):
        for sgn in (1, -1):
            w = mid + sgn * frac * nrm / abs(nrm) * scale
            if _polyline_clear([z0, w, z1], chords):
                return [z0, w, z1]
    # two-waypoint box detours
    for frac in (0.5, 1.0, 2.0, 3.0):
        for sgn in (1, -1):
            off = sgn * frac * nrm / abs(nrm) * scale
            pts = [z0, z0 + off, z1 + off, z1]
            if _polyline_clear(pts, chords):
                return pts
    raise GapPathBlocked(f"gap path blocked for gap {j}")


def gap_integral(pot, ep, h, j, *, br=None, tol=1e-13, n=None, waypoints=None,
                 return_order=False):
    """``int_{b_j}^{a_{j+1}} h R**(1/2) ds`` on a cut-avoiding polyline."""
    if not 1 <= j <= ep.q - 1:
        raise ValueError(f"gap index {j} outside 1..{ep.q - 1}")
    br = br or BranchedSqrtR(ep)
    wp = waypoints if waypoints is not None else gap_path(ep, j)
    val, order = integrate_path(_hR(h, br), wp, True, True, tol=tol, n=n)
    return (val, order) if return_order else val


@dataclass
class ResidualVector:
    """The 4q real entries: moments, then cut conditions, then gap conditions."""

    values: np.ndarray
    q: int
    orders: tuple = ()

    def __len__(self):
        return len(self.values)

    @property
    def norm(self) -> float:
        return float(np.max(np.abs(self.values)))

    @property
    def moment_part(self):
        return self.values[:2 * self.q + 2]

    @property
    def cut_part(self):
        return self.values[2 * self.q + 2:3 * self.q + 1]

    @property
    def gap_part(self):
        return self.values[3 * self.q + 1:]


def residual(pot, ep, *, tol=1e-13, orders=None) -> ResidualVector:
    """Assemble the endpoint equations at ``ep``.

    ``orders`` fixes the quadrature rule of every integral (as returned in a
    previous call) so that finite differences see a smooth map.
    """
    q = ep.q
    out = np.empty(4 * q)
    T = moments(pot, ep)
    T[q] += 1.0
    out[0:2 * q + 2:2] = T.real
    out[1:2 * q + 2:2] = T.imag
    used = []
    if q > 1:
        h = compute_h(pot, ep)
        br = BranchedSqrtR(ep)
        for j in range(1, q):
            n = orders[j - 1] if orders else None
            v, o = cut_integral(pot, ep, h, j, br=br, tol=tol, n=n, return_order=True)
            out[2 * q + 1 + j] = v.real
            used.append(o)
        for j in range(1, q):
            n = orders[q - 2 + j] if orders else None
            v, o = gap_integral(pot, ep, h, j, br=br, tol=tol, n=n, return_order=True)
            out[3 * q + j] = v.real
            used.append(o)
    if not np.all(np.isfinite(out)):
        raise SolverError("non-finite residual")
    return ResidualVector(out, q, tuple(used))


def jacobian(pot, ep, *, fd_h=1e-7, tol=1e-13, base=None):
    """Forward-difference Jacobian of the residual in the real endpoint vector."""
    base = base or residual(pot, ep, tol=tol)
    x = ep.to_vector()
    J = np.empty((len(x), len(x)))
    orders = base.orders or None
    f0 = base.values
    for i in range(len(x)):
        step = fd_h * (1.0 + abs(x[i]))
        xp = x.copy()
        xp[i] += step
        fp = residual(pot, EndpointSet.from_vector(xp, ep.q), orders=orders).values
        J[:, i] = (fp - f0) / step
    return J


@dataclass
class SolveReport:
    converged: bool
    endpoints: EndpointSet
    residual_norm: float
    iterations: int
    jacobian_condition: float
    trail: list = field(default_factory=list)
    message: str = ""

    def to_dict(self):
        ep = self.endpoints
        return {
            "converged": bool(self.converged),
            "q": ep.q,
            "a": [[z.real, z.imag] for z in ep.a],
            "b": [[z.real, z.imag] for z in ep.b],
            "residual_norm": self.residual_norm,
            "iterations": self.iterations,
            "jacobian_condition": self.jacobian_condition,
            "trail": list(self.trail),
            "message": self.message,
        }


def solve_endpoints(pot, q, initial: EndpointSet, opts: SolveOptions = None) -> SolveReport:
    """Damped Newton on the endpoint equations.

    Raises
    ------
    CoalescingEndpoints
        Two endpoints closer than ``opts.coalesce_tol``.
    NearSingularSystem
        Jacobian condition estimate above ``opts.cond_max``.
    NoConvergence
        Line search failure or iteration budget exhausted.
    """
    opts = opts or SolveOptions()
    if initial.q != q:
        raise ValueError("seed has the wrong number of cuts")
    if q > 2 * pot.p - 1:
        raise ValueError(f"q={q} exceeds 2p-1={2 * pot.p - 1}")
    ep = initial
    if ep.min_separation() < opts.coalesce_tol:
        raise CoalescingEndpoints("coalescing endpoints in seed")
    try:
        F = residual(pot, ep, tol=opts.quad_tol)
    except QuadratureStalled as exc:
        raise NoConvergence(f"no convergence: residual unavailable at seed ({exc})") from exc
    trail = [F.norm]
    cond = float("nan")
    for it in range(opts.max_iter + 1):
        if F.norm <= opts.newton_tol:
            return SolveReport(True, ep, F.norm, it, cond, trail)
        if it == opts.max_iter:
            break
        J = jacobian(pot, ep, fd_h=opts.fd_h, tol=opts.quad_tol, base=F)
        try:
            cond = float(np.linalg.cond(J))
        except np.linalg.LinAlgError:
            cond = float("inf")
        rep = SolveReport(False, ep, F.norm, it, cond, trail)
        if not np.isfinite(cond) or cond > opts.cond_max:
            raise NearSingularSystem(f"near-singular system (cond={cond:.3g})", rep)
        dx = np.linalg.solve(J, -F.values)
        x = ep.to_vector()
        lam = 1.0
        for _ in range(opts.max_halvings):
            try:
                trial = EndpointSet.from_vector(x + lam * dx, q)
                if trial.min_separation() < opts.coalesce_tol:
                    raise CoalescingEndpoints("coalescing endpoints")
                Ft = residual(pot, trial, tol=opts.quad_tol)
            except CoalescingEndpoints:
                lam *= 0.5
                continue
            except Exception:
                lam *= 0.5
                continue
            if Ft.norm < F.norm or Ft.norm <= opts.newton_tol:
                break
            lam *= 0.5
        else:
            rep.message = "line search failed"
            if ep.min_separation() < 1e3 * opts.coalesce_tol:
                raise CoalescingEndpoints("coalescing endpoints", rep)
            raise NoConvergence("no convergence: line search failed", rep)
        ep, F = trial, Ft
        trail.append(F.norm)
    rep = SolveReport(False, ep, F.norm, opts.max_iter, cond, trail, "iteration budget exhausted")
    raise NoConvergence("no convergence within max_iter", rep)


@dataclass(frozen=True)
class ContinuationPolicy:
    initial_step: float = 0.1
    min_step: float = 1e-4
    shrink: float = 0.5
    grow: float = 1.5
    max_step: float = 0.25


@dataclass
class ContinuationPath:
    t_start: tuple
    t_end: tuple
    policy: ContinuationPolicy
    params: list = field(default_factory=list)
    reports: list = field(default_factory=list)
    completed: bool = False

    @property
    def last(self) -> SolveReport:
        return self.reports[-1]


def continue_in_t(pot_start, pot_end, q, seed, policy=None, *, opts=None, gate=None):
    """Follow a solution along ``t(s) = (1-s) t_start + s t_end``, ``s`` in ``[0, 1]``.

    ``gate(pot, report)`` may reject a converged step (for instance when the
    regime changes); a rejected or failed step is halved until the step falls
    below ``policy.min_step``, at which point :class:`BoundaryReached` is
    raised with the last accepted ``s``.
    """
    policy = policy or ContinuationPolicy()
    opts = opts or SolveOptions()
    t0 = np.asarray(pot_start.t, dtype=complex)
    t1 = np.asarray(pot_end.t, dtype=complex)
    path = ContinuationPath(tuple(t0), tuple(t1), policy)
    rep = solve_endpoints(pot_start, q, seed, opts)
    path.params.append(0.0)
    path.reports.append(rep)
    if np.allclose(t0, t1, rtol=0, atol=0):
        path.completed = True
        return path
    s, ds = 0.0, policy.initial_step
    prev_ep, prev_prev = rep.endpoints, None
    prev_s = None
    while s < 1.0:
        ds = min(ds, 1.0 - s, policy.max_step)
        s_new = s + ds
        pot = pot_start.with_t(tuple((1 - s_new) * t0 + s_new * t1))
        guess = prev_ep
        if prev_prev is not None and prev_s is not None and s - prev_s > 0:
            # secant predictor
            ratio = ds / (s - prev_s)
            xg = prev_ep.to_vector() + ratio * (prev_ep.to_vector() - prev_prev.to_vector())
            guess = EndpointSet.from_vector(xg, q)
        ok = False
        try:
            r = solve_endpoints(pot, q, guess, opts)
            if gate is None or gate(pot, r):
                ok = True
        except SolverError:
            try:
                r = solve_endpoints(pot, q, prev_ep, opts)
                ok = gate is None or gate(pot, r)
            except SolverError:
                ok = False
        if ok:
            prev_prev, prev_s = prev_ep, s
            s = s_new
            prev_ep = r.endpoints
            path.params.append(s)
            path.reports.append(r)
            ds *= policy.grow
        else:
            ds *= policy.shrink
            if ds < policy.min_step:
                raise BoundaryReached(f"boundary reached after s={s:.6g}", last_t=s, path=path)
    path.completed = True
    return path
