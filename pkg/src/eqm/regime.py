"""Regular q-cut checks, stable-land masks and classification of a parameter point."""
from __future__ import annotations

import json
import math
import zlib
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy import ndimage
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import breadth_first_order, connected_components

from .endpoint_system import (SolveOptions, cut_integral, gap_integral,
                              solve_endpoints)
from .errors import (EqmError, QuadratureStalled, ResolutionInsufficient,
                     SolverError, TracingError)
from .measure import EquilibriumMeasure, compute_h, density_at
from .poly_core import BranchedSqrtR, EndpointSet, Potential, poly_roots
from .quad_diff import (EtaEvaluator, TraceOptions, angle_index,
                        build_critical_graph, graph_faces,
                        infinity_sector_dart, teichmuller_audit)

__all__ = [
    "StableLandMask", "RegimeReport", "Classification", "RegimeOptions",
    "stable_land_mask", "check_regular", "classify", "symmetric_seeds",
    "SeedCache",
]


@dataclass(frozen=True)
class RegimeOptions:
    solve: SolveOptions = SolveOptions()
    trace: TraceOptions = TraceOptions()
    zero_dist_rel: float = 1e-6
    with_mask: bool = False
    mask_resolution: int = 161
    multistart: int = 8
    audit: bool = False


# ---------------------------------------------------------------- seeds

def _is_even_quartic(pot):
    return pot.p == 2 and pot.t[0] == 0 and pot.t[2] == 0


def _pairings(points, q):
    """Label ``2q`` points in traversal order; also the order shifted by one."""
    base = EndpointSet.from_points(points)
    out = [base]
    inter = base.interleaved
    if q > 1:
        shifted = inter[1:] + inter[:1]
        out.append(EndpointSet(q, shifted[0::2], shifted[1::2]))
    return out


def _three_cut_symmetric(pot, opts, n=15):
    """Symmetric three-cut seeds for ``z**4/4 + s z**2/2``.

    With ``h = 1`` the endpoints are the zeros of
    ``(z**3 + s z)**2 - 4 z**2 - 4c``; the complex constant ``c`` is fixed by
    the first cut and first gap conditions (the others follow by symmetry).
    """
    s = pot.t[1]

    def config(c):
        u = np.roots([1.0, 2 * s, s * s - 4.0, -4.0 * c])
        z = np.sqrt(u.astype(complex))
        return EndpointSet.from_points(np.concatenate([z, -z]))

    def F(x):
        c = complex(x[0], x[1])
        ep = config(c)
        if ep.min_separation() < 1e-6:
            raise QuadratureStalled("coalescing")
        h = compute_h(pot, ep)
        return np.array([cut_integral(pot, ep, h, 1, tol=1e-10).real,
                         gap_integral(pot, ep, h, 1, tol=1e-10).real])

    scale = 1.0 + abs(s) ** 2
    grid = np.linspace(-scale, scale, n)
    cand = []
    for cr in grid:
        for ci in grid:
            try:
                f = F([cr, ci])
            except EqmError:
                continue
            cand.append((float(np.max(np.abs(f))), cr, ci))
    cand.sort()
    seeds = []
    for _, cr, ci in cand[:6]:
        x = np.array([cr, ci])
        try:
            for _ in range(30):
                f = F(x)
                if np.max(np.abs(f)) < 1e-10:
                    break
                J = np.empty((2, 2))
                for k in range(2):
                    xp = x.copy()
                    xp[k] += 1e-7 * (1 + abs(x[k]))
                    J[:, k] = (F(xp) - f) / (xp[k] - x[k])
                dx = np.linalg.solve(J, -f)
                lam = 1.0
                while lam > 1e-4:
                    try:
                        if np.max(np.abs(F(x + lam * dx))) < np.max(np.abs(f)):
                            break
                    except EqmError:
                        pass
                    lam *= 0.5
                x = x + lam * dx
            else:
                continue
        except (EqmError, np.linalg.LinAlgError):
            continue
        ep = config(complex(x[0], x[1]))
        if all(_distinct(ep, e) for e in seeds):
            seeds.append(ep)
    return seeds


def _distinct(e1, e2, tol=1e-6):
    # labels matter: the same points paired differently give another system
    if e1.q != e2.q:
        return True
    p1 = np.concatenate([e1.a, e1.b])
    p2 = np.concatenate([e2.a, e2.b])
    return np.max(np.abs(p1 - p2)) > tol


def symmetric_seeds(pot: Potential, q: int, opts: RegimeOptions = None):
    """Closed-form seeds available for ``p = 1`` and for the even quartic."""
    opts = opts or RegimeOptions()
    if pot.p == 1 and q == 1:
        c = -pot.t[0]
        return [EndpointSet(1, (c - 2,), (c + 2,))]
    if not _is_even_quartic(pot):
        return []
    s = pot.t[1]
    if q == 1:
        out = []
        for sg in (1, -1):
            b2 = (-2 * s + sg * 2 * np.sqrt(s * s + 12)) / 3
            b = np.sqrt(b2)
            if abs(b) > 1e-8:
                out.append(EndpointSet.from_points([b, -b]))
        return out
    if q == 2:
        A = np.sqrt(-s - 2 + 0j)
        B = np.sqrt(-s + 2 + 0j)
        out = []
        for pts in ([A, B, -A, -B],):
            out += _pairings(pts, 2)
        # cuts (A, B) and (-B, -A) in either traversal order
        out.append(EndpointSet(2, (-B, A), (-A, B)))
        out.append(EndpointSet(2, (-A, B), (-B, A)))
        res = []
        for e in out:
            if e.min_separation() > 1e-8 and all(_distinct(e, r) for r in res):
                res.append(e)
        return res
    if q == 3:
        return _three_cut_symmetric(pot, opts)
    return []


def _multistart(pot, q, n):
    key = zlib.crc32(repr((pot.p, q, tuple(pot.t))).encode())
    rng = np.random.default_rng(key)
    R = 1.5 * pot.scale()
    out = []
    for _ in range(n):
        r = R * np.sqrt(rng.random(2 * q))
        th = 2 * np.pi * rng.random(2 * q)
        out.append(EndpointSet.from_points(r * np.exp(1j * th)))
    return out


class SeedCache:
    """Converged endpoint sets keyed by ``(p, q)`` with the ``t`` they solve.

    Reads return a snapshot list; writes replace the entry list atomically.
    """

    def __init__(self):
        self._d = {}

    def nearest(self, pot, q, k=2):
        lst = list(self._d.get((pot.p, q), ()))
        t = np.asarray(pot.t)
        lst.sort(key=lambda e: float(np.linalg.norm(np.asarray(e[0]) - t)))
        return [e[1] for e in lst[:k]]

    def add(self, pot, ep, limit=64):
        key = (pot.p, ep.q)
        lst = [e for e in self._d.get(key, ()) if e[0] != tuple(pot.t)]
        lst.append((tuple(pot.t), ep))
        self._d[key] = lst[-limit:]

    def to_json(self):
        doc = []
        for (p, q), lst in self._d.items():
            for t, ep in lst:
                doc.append({"p": p, "q": q, "t": [[z.real, z.imag] for z in t],
                            "a": [[z.real, z.imag] for z in ep.a],
                            "b": [[z.real, z.imag] for z in ep.b]})
        return json.dumps(doc)

    @classmethod
    def from_json(cls, text):
        c = cls()
        for e in json.loads(text):
            t = tuple(complex(*x) for x in e["t"])
            ep = EndpointSet(e["q"], [complex(*x) for x in e["a"]], [complex(*x) for x in e["b"]])
            c.add(Potential(e["p"], t), ep)
        return c


# ---------------------------------------------------------------- mask

@dataclass
class StableLandMask:
    window: tuple
    xs: np.ndarray
    ys: np.ndarray
    re_eta: np.ndarray
    labels: np.ndarray
    right_label: int
    left_label: int

    @property
    def step(self):
        return float(self.xs[1] - self.xs[0])

    def pixel(self, z):
        i = int(round((z.imag - self.ys[0]) / (self.ys[1] - self.ys[0])))
        j = int(round((z.real - self.xs[0]) / (self.xs[1] - self.xs[0])))
        return min(max(i, 0), len(self.ys) - 1), min(max(j, 0), len(self.xs) - 1)

    def label_at(self, z):
        return int(self.labels[self.pixel(z)])

    def corridor_width(self, z_from, target_label_pixel, exempt=None):
        """Largest radius of a disc that can travel inside the negative set between two pixels.

        ``exempt = (center, radius)`` waives the width requirement inside a
        ball, typically around the endpoint where the sector is a thin wedge.
        """
        neg = self.labels > 0
        dist = ndimage.distance_transform_edt(neg) * self.step
        src = self.pixel(z_from)
        dst = target_label_pixel
        if not neg[src] or not neg[dst]:
            return 0.0
        free = _disc(neg.shape, src, dst)
        if exempt is not None:
            X, Y = np.meshgrid(self.xs, self.ys)
            free |= np.abs(X + 1j * Y - exempt[0]) <= exempt[1]
        lo, hi = 0.0, float(dist.max())
        lab, _ = ndimage.label(neg)
        if lab[src] != lab[dst]:
            return 0.0
        for _ in range(40):
            mid = 0.5 * (lo + hi)
            m = (dist >= mid) | free
            lab, _ = ndimage.label(m & neg)
            if lab[src] == lab[dst] and lab[src] > 0:
                lo = mid
            else:
                hi = mid
            if hi - lo < 0.25 * self.step:
                break
        return lo


def _disc(shape, *pix):
    m = np.zeros(shape, dtype=bool)
    for (i, j) in pix:
        m[i, j] = True
    return m


def _grid_eta(ev, xs, ys, blockers):
    """``eta`` on a grid by integrating along a spanning tree of unblocked grid edges."""
    X, Y = np.meshgrid(xs, ys)
    Z = X + 1j * Y
    ny, nx = Z.shape
    F = ev.deta(Z.ravel()).reshape(Z.shape)
    Fh = ev.deta(((Z[:, :-1] + Z[:, 1:]) / 2).ravel()).reshape(ny, nx - 1)
    Fv = ev.deta(((Z[:-1, :] + Z[1:, :]) / 2).ravel()).reshape(ny - 1, nx)
    dx = xs[1] - xs[0]
    dy = ys[1] - ys[0]
    dH = dx / 6 * (F[:, :-1] + 4 * Fh + F[:, 1:])
    dV = 1j * dy / 6 * (F[:-1, :] + 4 * Fv + F[1:, :])
    # blocked cells: every edge of a blocked cell is removed
    cell = blockers
    okH = np.ones((ny, nx - 1), dtype=bool)
    okV = np.ones((ny - 1, nx), dtype=bool)
    okH[:-1, :] &= ~cell
    okH[1:, :] &= ~cell
    okV[:, :-1] &= ~cell
    okV[:, 1:] &= ~cell
    idx = np.arange(ny * nx).reshape(ny, nx)
    r = np.concatenate([idx[:, :-1][okH], idx[:-1, :][okV]])
    c = np.concatenate([idx[:, 1:][okH], idx[1:, :][okV]])
    w = np.concatenate([dH[okH], dV[okV]])
    n = ny * nx
    G = coo_matrix((np.ones(len(r)), (r, c)), shape=(n, n)).tocsr()
    inc = {}
    ncomp, comp = connected_components(G, directed=False)
    # edge increments as a lookup keyed by (min, max) node
    key = r.astype(np.int64) * n + c
    order_key = np.argsort(key)
    skey = key[order_key]
    sval = w[order_key]
    eta = np.full(n, np.nan + 0j)
    sizes = np.bincount(comp)
    Zf = Z.ravel()
    for k in range(ncomp):
        if sizes[k] < 4:
            continue
        members = np.nonzero(comp == k)[0]
        # seed at the member farthest from every blocker
        seed = members[np.argmax(_clearance(Zf[members], ev))]
        try:
            eta[seed] = ev.eta(Zf[seed])
        except EqmError:
            continue
        order, pred = breadth_first_order(G, seed, directed=False, return_predecessors=True)
        for v in order[1:]:
            u = pred[v]
            lo, hi = (int(u), int(v)) if u < v else (int(v), int(u))
            pos = np.searchsorted(skey, lo * n + hi)
            d = sval[pos]
            eta[v] = eta[u] + (d if u < v else -d)
    return Z, eta.reshape(Z.shape)


def _clearance(z, ev):
    d = np.min(np.abs(z[:, None] - ev.branch_points[None, :]), axis=1)
    span = float(np.max(np.abs(ev.branch_points - ev.base)))
    return np.minimum(d, span)


def stable_land_mask(ev: EtaEvaluator, window=None, resolution=161, check_refinement=False):
    """Sign of ``Re eta`` on a grid and the components of ``{Re eta < 0}``.

    ``ev`` should carry the traced cut arcs as branch cuts so that the sign is
    that of the genuine ``eta``. Components are labelled with 4-connectivity.
    """
    pts = np.concatenate([ev.branch_points, np.atleast_1d(ev.h.zeros)])
    if window is None:
        span = float(np.max(np.abs(pts))) + 1.0
        window = (-3 * span, 3 * span, -3 * span, 3 * span)
    x0, x1, y0, y1 = window
    xs = np.linspace(x0, x1, resolution)
    ys = np.linspace(y0, y1, resolution)
    dx = xs[1] - xs[0]
    dy = ys[1] - ys[0]
    blockers = np.zeros((resolution - 1, resolution - 1), dtype=bool)

    def mark(z):
        j = np.floor((z.real - x0) / dx).astype(int)
        i = np.floor((z.imag - y0) / dy).astype(int)
        ok = (i >= 0) & (i < resolution - 1) & (j >= 0) & (j < resolution - 1)
        blockers[i[ok], j[ok]] = True

    for c0, c1 in zip(ev._c0, ev._c1):
        n = max(2, int(4 * abs(c1 - c0) / min(dx, dy)) + 2)
        mark(c0 + (c1 - c0) * np.linspace(0, 1, n))
    for b in ev.branch_points:
        ring = b + 1.5 * max(dx, dy) * np.exp(1j * np.linspace(0, 2 * np.pi, 16))
        mark(np.concatenate([[b], ring]))
    Z, E = _grid_eta(ev, xs, ys, blockers)
    re = E.real
    neg = np.nan_to_num(re, nan=1.0) < 0
    labels, _ = ndimage.label(neg)
    iy0 = int(np.argmin(np.abs(ys)))
    right = int(labels[iy0, -1])
    left = int(labels[iy0, 0])
    mask = StableLandMask(window, xs, ys, re, labels, right, left)
    if check_refinement:
        fine = stable_land_mask(ev, window, 2 * resolution - 1)
        if _boundary_signature(fine) != _boundary_signature(mask):
            raise ResolutionInsufficient(
                f"resolution insufficient: boundary adjacency changes under refinement "
                f"({_boundary_signature(mask)} vs {_boundary_signature(fine)})")
    return mask


def _boundary_signature(m: StableLandMask):
    """Number of negative components meeting the window edge, and whether the
    left and right escape components coincide."""
    lab = m.labels
    edge = np.concatenate([lab[0], lab[-1], lab[:, 0], lab[:, -1]])
    n_edge = len(set(edge[edge > 0].tolist()))
    same = bool(m.right_label and m.right_label == m.left_label)
    return n_edge, same


# ---------------------------------------------------------------- regime check

@dataclass
class RegimeReport:
    q: int
    verdict: str
    conditions: list = field(default_factory=lambda: [False] * 5)
    boundary_type_hint: str = "none"
    endpoints: EndpointSet = None
    residual_norm: float = float("nan")
    jacobian_condition: float = float("nan")
    h_coeffs: list = None
    h_zeros: list = None
    diagnostics: dict = field(default_factory=dict)
    graph: object = None
    mask: object = None

    def to_dict(self):
        ep = self.endpoints
        d = {
            "q": self.q, "verdict": self.verdict, "conditions": list(map(bool, self.conditions)),
            "boundary_type_hint": self.boundary_type_hint,
            "residual_norm": self.residual_norm,
            "jacobian_condition": self.jacobian_condition,
            "diagnostics": self.diagnostics,
        }
        if ep is not None:
            d["a"] = [[z.real, z.imag] for z in ep.a]
            d["b"] = [[z.real, z.imag] for z in ep.b]
        if self.h_coeffs is not None:
            d["h_coeffs"] = [[z.real, z.imag] for z in self.h_coeffs]
            d["h_zeros"] = [[z.real, z.imag] for z in self.h_zeros]
        return d

    def to_json(self):
        return json.dumps(self.to_dict(), indent=1, default=float)


def _dist_point_polyline(z, pl):
    pl = np.asarray(pl)
    if len(pl) == 1:
        return float(abs(z - pl[0]))
    d = np.diff(pl)
    t = np.clip(((z - pl[:-1]) * np.conj(d)).real / np.maximum(np.abs(d) ** 2, 1e-300), 0, 1)
    return float(np.min(np.abs(pl[:-1] + t * d - z)))


def _non_cut_dart(g, node_index, rot, darts):
    """Dart whose left face is the sector opposite the cut at an endpoint."""
    lst = rot.get(node_index, [])
    if len(lst) != 3:
        return None
    cut = [i for i, di in enumerate(lst) if g.edges[darts[di][3]].kind == "cut"]
    if len(cut) != 1:
        return None
    return lst[(cut[0] + 1) % 3]


def _support_chain(g, ep, j):
    """Polyline from ``a_j`` to ``b_j`` through on-graph zeros of ``h``, else the chord."""
    idx = {n.id: i for i, n in enumerate(g.nodes)}
    src, dst = idx[f"a{j + 1}"], idx[f"b{j + 1}"]
    adj = {}
    for e in g.edges:
        if e.kind == "connection" and e.start >= 0 and e.end >= 0:
            adj.setdefault(e.start, []).append((e.end, e.points))
            adj.setdefault(e.end, []).append((e.start, e.points[::-1]))
    prev = {src: None}
    queue = [src]
    while queue:
        u = queue.pop(0)
        if u == dst:
            break
        for v, pts in adj.get(u, ()):
            if v in prev or (v != dst and g.nodes[v].kind != "zero"):
                continue
            prev[v] = (u, pts)
            queue.append(v)
    if dst not in prev:
        return np.array([ep.a[j], ep.b[j]])
    parts = []
    v = dst
    while prev[v] is not None:
        u, pts = prev[v]
        parts.append(pts)
        v = u
    return np.concatenate(parts[::-1])


def _lens_clear(ep, j, arc):
    """No other branch point lies between the traced arc and the chord of cut ``j``."""
    from matplotlib.path import Path
    ring = np.concatenate([arc, [arc[0]]])
    path = Path(np.column_stack([ring.real, ring.imag]))
    others = [z for k, z in enumerate(ep.points) if z not in (ep.a[j], ep.b[j])]
    return not any(path.contains_point((z.real, z.imag)) for z in others)


def evaluate_solution(pot, q, ep, opts: RegimeOptions = None, report=None):
    """Check the five regularity conditions for a solved endpoint set."""
    opts = opts or RegimeOptions()
    rep = report or RegimeReport(q, "singular", endpoints=ep)
    h = compute_h(pot, ep)
    rep.h_coeffs = list(h.coeffs)
    rep.h_zeros = list(h.zeros)
    diag = rep.diagnostics
    ev = EtaEvaluator(pot, ep, h)
    try:
        g = build_critical_graph(ev, opts.trace, strict=False)
    except (TracingError, EqmError) as exc:
        diag["tracing_error"] = str(exc)
        rep.verdict = "singular"
        rep.boundary_type_hint = "unknown"
        zd = [min(abs(z - e) for e in ep.points) for z in h.zeros]
        if zd and min(zd) < 1e-3 * (1 + max(abs(e) for e in ep.points)):
            rep.boundary_type_hint = "a"
        return rep
    rep.graph = g
    diag["census"] = g.summary
    scale = g.scale
    # (1) every cut is a traced trajectory homotopic to its chord
    arcs = g.cut_polylines()
    c1 = []
    for j in range(q):
        arc = arcs.get(j)
        ok = arc is not None and _lens_clear(ep, j, arc)
        c1.append(bool(ok))
    diag["cuts_connected"] = c1
    cond1 = all(c1)
    # (2) zeros of h away from the support
    tol = opts.zero_dist_rel * scale
    zs = list(h.zeros)
    support = [arcs.get(j) if j in arcs else _support_chain(g, ep, j) for j in range(q)]
    d_support = [min(_dist_point_polyline(z, pl) for pl in support) for z in zs]
    d_end = [min(abs(z - e) for e in ep.points) for z in zs]
    diag["zero_support_dist"] = d_support
    diag["zero_endpoint_dist"] = d_end
    diag["min_endpoint_zero_dist"] = min(d_end) if d_end else None
    cond2 = all(d > tol for d in d_support)
    # (3)-(5) through faces of the embedded graph
    cond3 = cond4 = cond5 = False
    try:
        fd = graph_faces(g)
        faces, face_of, darts, rot = fd
        INF = len(g.nodes)
        right = infinity_sector_dart(g, darts, rot, 0.0)
        left = infinity_sector_dart(g, darts, rot, math.pi)
        idx = {n.id: i for i, n in enumerate(g.nodes)}

        def sector_face(node_id):
            di = _non_cut_dart(g, idx[node_id], rot, darts)
            return None if di is None else face_of[di]

        fb = sector_face(f"b{q}")
        fa = sector_face("a1")
        cond3 = fb is not None and right is not None and fb == face_of[right]
        cond4 = fa is not None and left is not None and fa == face_of[left]
        gaps = []
        for j in range(1, q):
            f1, f2 = sector_face(f"b{j}"), sector_face(f"a{j + 1}")
            gaps.append(bool(f1 is not None and f1 == f2))
        cond5 = all(gaps)
        diag["gaps_open"] = gaps
        if opts.audit:
            aud = teichmuller_audit(g, faces_data=fd)
            diag["teichmuller_ok"] = all(a["ok"] for a in aud)
    except EqmError as exc:
        diag["face_error"] = str(exc)
    rep.conditions = [bool(cond1), bool(cond2), bool(cond3), bool(cond4), bool(cond5)]
    # density positivity along traced cuts (diagnostic)
    if cond1:
        try:
            em = EquilibriumMeasure(pot, ep, h, cut_polylines=arcs)
            mins = []
            for j in range(q):
                _, rho = em.density_samples(j, 16)
                mins.append(float(rho.real.min()))
            diag["min_density"] = min(mins)
            diag["density_positive"] = min(mins) > 0
        except EqmError:
            pass
    if opts.with_mask and cond1:
        try:
            evt = EtaEvaluator(pot, ep, h, BranchedSqrtR(ep, arcs))
            m = stable_land_mask(evt, resolution=opts.mask_resolution)
            rep.mask = m
            widths = {}
            bq = ep.b[-1]
            if m.right_label:
                iy0 = int(np.argmin(np.abs(m.ys)))
                ang = _sector_bisector(g, f"b{q}")
                if ang is not None:
                    z0 = bq + 3 * m.step * np.exp(1j * ang)
                    others = [n.z for n in g.nodes if n.z != bq]
                    rex = 0.3 * min([abs(z - bq) for z in others] or [1.0])
                    widths["b_q_right"] = m.corridor_width(
                        z0, (iy0, len(m.xs) - 1), exempt=(bq, rex))
            diag["corridor_widths"] = widths
        except EqmError as exc:
            diag["mask_error"] = str(exc)
    if all(rep.conditions):
        rep.verdict = "regular"
        rep.boundary_type_hint = "none"
    else:
        rep.verdict = "singular"
        if not cond2:
            near_end = [de <= 1e3 * tol or de <= ds + tol for de, ds in zip(d_end, d_support)]
            rep.boundary_type_hint = "a" if any(near_end) else "b"
        elif not (cond3 and cond4 and cond5):
            rep.boundary_type_hint = "c"
    return rep


def _sector_bisector(g, node_id):
    for i, n in enumerate(g.nodes):
        if n.id == node_id:
            cut = [e for e in g.edges if e.kind == "cut" and i in (e.start, e.end)]
            if not cut:
                return None
            e = cut[0]
            d = n.directions[e.start_dir] if e.start == i else n.directions[e.end_dir]
            return d + math.pi
    return None


def check_regular(pot: Potential, q: int, seed: EndpointSet, opts: RegimeOptions = None):
    """Solve from ``seed`` and evaluate the five regularity conditions."""
    opts = opts or RegimeOptions()
    try:
        sol = solve_endpoints(pot, q, seed, opts.solve)
    except (SolverError, QuadratureStalled) as exc:
        rep = RegimeReport(q, "unsolvable")
        rep.diagnostics["solver_error"] = f"{type(exc).__name__}: {exc}"
        return rep
    rep = RegimeReport(q, "singular", endpoints=sol.endpoints,
                       residual_norm=sol.residual_norm,
                       jacobian_condition=sol.jacobian_condition)
    rep.diagnostics["iterations"] = sol.iterations
    return evaluate_solution(pot, q, sol.endpoints, opts, rep)


# ---------------------------------------------------------------- classify

@dataclass
class Classification:
    t: tuple
    p: int
    reports: dict
    selected_q: int = None
    verdict: str = "none"

    def to_dict(self):
        return {
            "p": self.p, "t": [[z.real, z.imag] for z in self.t],
            "selected_q": self.selected_q, "verdict": self.verdict,
            "reports": {str(q): r.to_dict() for q, r in self.reports.items()},
        }

    def to_json(self):
        return json.dumps(self.to_dict(), indent=1, default=float)


def classify_q(pot, q, opts=None, cache=None, extra_seeds=None, multistart=True,
               exhaustive=True):
    """Best report for one ``q``: the first regular solution, else the first solved one.

    Seeds are tried in stages: ``extra_seeds``, closed-form symmetric seeds,
    the cache, then random multistart. Multistart runs only when nothing has
    converged. Without ``exhaustive`` the costly stages (the three-cut
    symmetric search and multistart) are also skipped once anything has
    converged.
    """
    opts = opts or RegimeOptions()
    solved = []
    first = None

    def attempt(seed, src):
        nonlocal first
        if any(not _distinct(seed, s, 1e-10) for s in solved):
            return None
        try:
            sol = solve_endpoints(pot, q, seed, opts.solve)
        except (SolverError, QuadratureStalled) as exc:
            if first is None:
                first = RegimeReport(q, "unsolvable")
                first.diagnostics["solver_error"] = f"{type(exc).__name__}: {exc}"
            return None
        if any(not _distinct(sol.endpoints, s) for s in solved):
            return None
        solved.append(sol.endpoints)
        if cache is not None:
            cache.add(pot, sol.endpoints)
        rep = RegimeReport(q, "singular", endpoints=sol.endpoints,
                           residual_norm=sol.residual_norm,
                           jacobian_condition=sol.jacobian_condition)
        rep.diagnostics["iterations"] = sol.iterations
        rep.diagnostics["seed_source"] = src
        return evaluate_solution(pot, q, sol.endpoints, opts, rep)

    stages = [
        ("neighbor", lambda: list(extra_seeds or []), False),
        ("symmetric", lambda: symmetric_seeds(pot, q, opts), q >= 3),
        ("cache", lambda: cache.nearest(pot, q) if cache is not None else [], False),
        ("multistart", lambda: _multistart(pot, q, opts.multistart) if multistart else [],
         True),
    ]
    best = None
    for src, gen, costly in stages:
        if solved and (src == "multistart" or (costly and not exhaustive)):
            continue
        for seed in gen():
            if seed.q != q:
                continue
            rep = attempt(seed, src)
            if rep is None:
                continue
            if rep.verdict == "regular":
                return rep
            best = best or rep
    return best or first or RegimeReport(q, "unsolvable")


def classify(pot: Potential, opts: RegimeOptions = None, cache: SeedCache = None,
             extra_seeds=None, qs=None, multistart=True, exhaustive=True) -> Classification:
    """Run the regular-regime check for every admissible ``q``.

    ``extra_seeds`` maps ``q`` to seed lists tried before everything else.
    """
    opts = opts or RegimeOptions()
    qs = qs or range(1, 2 * pot.p)
    reports = {}
    for q in qs:
        reports[q] = classify_q(pot, q, opts, cache, (extra_seeds or {}).get(q), multistart,
                                exhaustive)
    regular = [q for q, r in reports.items() if r.verdict == "regular"]
    c = Classification(tuple(pot.t), pot.p, reports)
    if len(regular) == 1:
        c.selected_q = regular[0]
        c.verdict = "regular"
    elif len(regular) > 1:
        c.verdict = "ambiguous"
    return c
