"""The natural parameter eta, trajectories of ``Q dz**2`` and the critical graph.

``Q = h**2 R / 4`` so that ``eta' = -h R**(1/2) = -2 Q**(1/2)``. The critical
graph is the zero level set of ``Re eta`` through the critical points; it is
traced by following the line field ``Q dz**2 < 0``.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np
from numpy.polynomial import polynomial as npoly
from scipy import optimize
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import dijkstra

from ._quad import integrate_leg
from ._tracer import ESCAPED, SNAPPED, trace_kernel
from .errors import CensusViolation, QuadratureStalled, TracingError
from .poly_core import BranchedSqrtR, EndpointSet, Potential, horner

__all__ = [
    "EtaEvaluator", "Trajectory", "CriticalGraph", "GeodesicPolygon",
    "TraceOptions", "eta", "trace_trajectory", "build_critical_graph",
    "teichmuller_audit", "asymptotic_angles", "graph_faces",
]

TWO_PI = 2.0 * math.pi


def asymptotic_angles(p: int) -> np.ndarray:
    """The ``4p`` directions ``pi/4p + k pi/2p`` along which trajectories escape."""
    k = np.arange(4 * p)
    return math.pi / (4 * p) + k * math.pi / (2 * p)


def angle_index(theta: float, p: int):
    """Nearest asymptotic index and the signed deviation in radians."""
    step = math.pi / (2 * p)
    x = (theta - math.pi / (4 * p)) / step
    k = int(round(x))
    return k % (4 * p), (x - k) * step


# ---------------------------------------------------------------- segments

def _cross_mask(p0, p1, c0, c1, eps=1e-12):
    """Vectorised proper-intersection test of segments ``p0p1`` with ``c0c1``."""
    d1 = p1 - p0
    d2 = c1 - c0
    den = (np.conj(d1) * d2).imag
    w = c0 - p0
    with np.errstate(divide="ignore", invalid="ignore"):
        t = (np.conj(w) * d2).imag / den
        u = (np.conj(w) * d1).imag / den
    ok = np.abs(den) > eps * np.abs(d1) * np.abs(d2)
    proper = ok & (t > eps) & (t < 1 - eps) & (u > eps) & (u < 1 - eps)
    # collinear overlap counts as a crossing
    L2 = np.abs(d1) ** 2
    coll = ~ok & (np.abs((np.conj(d1) * w).imag) <= eps * np.sqrt(L2) * (1 + np.abs(w)))
    with np.errstate(divide="ignore", invalid="ignore"):
        s0 = ((c0 - p0) * np.conj(d1)).real / L2
        s1 = ((c1 - p0) * np.conj(d1)).real / L2
    overlap = (np.maximum(s0, s1) > eps) & (np.minimum(s0, s1) < 1 - eps)
    return proper | (coll & overlap)


def _dist_to_segments(z, c0, c1):
    """Distance from each point of ``z`` to the nearest segment."""
    z = np.asarray(z, dtype=complex)[:, None]
    d = (c1 - c0)[None, :]
    with np.errstate(divide="ignore", invalid="ignore"):
        t = np.clip(((z - c0[None, :]) * np.conj(d)).real / np.abs(d) ** 2, 0, 1)
    t = np.nan_to_num(t)
    return np.min(np.abs(c0[None, :] + t * d - z), axis=1)


class EtaEvaluator:
    """Path-tracked evaluation of ``eta(z) = -int_{b_q}^z h R**(1/2) ds``.

    The branch of ``R**(1/2)`` is that of ``br`` (straight cuts by default).
    Queries are answered from the nearest visible anchor, a branch point or a
    point of a coarse grid whose values are propagated from ``b_q`` along a
    shortest visibility path. ``anchor_rank`` selects an alternative anchor
    for independent path checks.
    """

    def __init__(self, pot: Potential, ep: EndpointSet, h, br=None, tol=1e-13):
        self.pot = pot
        self.ep = ep
        self.h = h
        self.br = br or BranchedSqrtR(ep)
        self.tol = tol
        self.base = ep.b[-1]
        obst = []
        for k in range(ep.q):
            pl = self.br.polylines.get(k)
            pts = pl if pl is not None else np.array([ep.a[k], ep.b[k]])
            obst += list(zip(pts[:-1], pts[1:]))
        self._c0 = np.array([o[0] for o in obst], dtype=complex)
        self._c1 = np.array([o[1] for o in obst], dtype=complex)
        self.branch_points = np.array(ep.points)
        self._bp_eta = {}
        self._anchors = None
        self._anchor_eta = None

    # integrand eta'
    def deta(self, s):
        return -self.h(s) * self.br(s)

    def visible(self, z0, z1) -> bool:
        if len(self._c0) == 0:
            return True
        return not np.any(_cross_mask(complex(z0), complex(z1), self._c0, self._c1))

    def _bp_clear(self, z0, z1, margin):
        """True if no branch point other than the leg ends lies within ``margin``."""
        bp = self.branch_points
        far = (np.abs(bp - z0) > 0) & (np.abs(bp - z1) > 0)
        if not np.any(far):
            return True
        d = _dist_to_segments(bp[far], np.array([z0]), np.array([z1]))
        return bool(np.all(d > margin * abs(z1 - z0)))

    def _leg(self, z0, z1, sing0=False, sing1=False, depth=0):
        try:
            val, _ = integrate_leg(self.deta, z0, z1, sing0, sing1, tol=self.tol, nmax=512)
        except QuadratureStalled:
            if depth >= 12:
                raise
            # a nearby singularity: bisect instead of raising the order further
            zm = 0.5 * (z0 + z1)
            val = (self._leg(z0, zm, sing0, False, depth + 1)
                   + self._leg(zm, z1, False, sing1, depth + 1))
        return val

    def _is_bp(self, z):
        return int(np.argmin(np.abs(self.branch_points - z))) if np.min(
            np.abs(self.branch_points - z)) == 0 else None

    def _build_anchors(self):
        pts = self.branch_points
        span = max(1.0, float(np.max(np.abs(pts - pts.mean()))))
        c = pts.mean()
        g = np.linspace(-1.6, 1.6, 11) * span
        X, Y = np.meshgrid(g, g)
        grid = (c + X + 1j * Y).ravel()
        ring = c + 2.5 * span * np.exp(1j * (np.arange(16) + 0.5) * TWO_PI / 16)
        anc = np.concatenate([[self.base], grid, ring])
        dmin = np.min(np.abs(anc[1:, None] - pts[None, :]), axis=1)
        ok = dmin > 0.08 * span
        if len(self._c0):
            ok &= _dist_to_segments(anc[1:], self._c0, self._c1) > 0.04 * span
        keep = np.concatenate([[True], ok])
        anc = anc[keep]
        n = len(anc)
        rows, cols, wts = [], [], []
        for i in range(n):
            p0 = np.full(n - i - 1, anc[i])
            p1 = anc[i + 1:]
            if len(self._c0):
                blocked = np.zeros(len(p1), dtype=bool)
                for c0, c1 in zip(self._c0, self._c1):
                    blocked |= _cross_mask(p0, p1, c0, c1)
            else:
                blocked = np.zeros(len(p1), dtype=bool)
            L = np.abs(p1 - anc[i])
            ok = ~blocked & (L < 1.2 * span)
            for m in np.nonzero(ok)[0]:
                if not self._bp_clear(anc[i], p1[m], 0.05):
                    ok[m] = False
            js = np.nonzero(ok)[0] + i + 1
            rows += [i] * len(js)
            cols += js.tolist()
            wts += L[ok].tolist()
        G = csr_matrix((wts, (rows, cols)), shape=(n, n))
        _, pred = dijkstra(G, directed=False, indices=0, return_predecessors=True)
        vals = np.full(n, np.nan + 0j)
        vals[0] = 0.0
        order = np.argsort(_, kind="stable")
        for i in order:
            if i == 0 or not np.isfinite(_[i]):
                continue
            j = pred[i]
            vals[i] = vals[j] + self._leg(anc[j], anc[i], sing0=(j == 0))
        good = np.isfinite(vals)
        self._anchors = anc[good]
        self._anchor_eta = vals[good]

    def _bp_value(self, k):
        if k not in self._bp_eta:
            z = self.branch_points[k]
            if z == self.base:
                self._bp_eta[k] = 0j
            else:
                self._bp_eta[k] = self._from_anchor(z, sing_end=True)
        return self._bp_eta[k]

    def _from_anchor(self, z, sing_end=False, rank=0):
        if self._anchors is None:
            self._build_anchors()
        d = np.abs(self._anchors - z)
        order = np.argsort(d, kind="stable")
        # prefer legs that keep clear of the other branch points; scan nearest first
        # and stop as soon as the requested rank is available
        clear, other = [], []
        for i in order:
            if not self.visible(self._anchors[i], z):
                continue
            if self._bp_clear(self._anchors[i], z, 0.05):
                clear.append(i)
                if len(clear) > rank:
                    break
            else:
                other.append(i)
        cands = clear + other
        if rank >= len(cands):
            raise TracingError("no cut-avoiding path to the query point")
        i = cands[rank]
        return self._anchor_eta[i] + self._leg(
            self._anchors[i], z, sing0=(self._anchors[i] == self.base), sing1=sing_end)

    def eta(self, z, path_hint=None, anchor_rank=0):
        """``eta`` at ``z``; ``path_hint`` is an explicit list of waypoints from ``b_q``."""
        z = complex(z)
        if z == self.base:
            return 0j
        if path_hint is not None:
            wp = [self.base] + [complex(w) for w in path_hint] + [z]
            total = 0j
            for i in range(len(wp) - 1):
                if not self.visible(wp[i], wp[i + 1]):
                    raise TracingError("path hint crosses a cut")
                total += self._leg(wp[i], wp[i + 1], sing0=(i == 0),
                                   sing1=(i == len(wp) - 2 and self._is_bp(z) is not None))
            return total
        k = self._is_bp(z)
        if k is not None:
            return self._bp_value(k)
        if anchor_rank == 0:
            dist = np.abs(self.branch_points - z)
            order = np.argsort(dist)
            near = order[0]
            other = dist[order[1]] if len(order) > 1 else np.inf
            # legs that start at a branch point absorb the square-root behaviour
            if dist[near] < 0.5 * other and self.visible(self.branch_points[near], z) \
                    and self._bp_clear(self.branch_points[near], z, 0.05):
                return self._bp_value(near) + self._leg(self.branch_points[near], z, sing0=True)
            if self.visible(self.base, z) and self._bp_clear(self.base, z, 0.05) \
                    and abs(z - self.base) < 1.5 * max(
                    1.0, float(np.max(np.abs(self.branch_points - self.base)))):
                return self._leg(self.base, z, sing0=True)
        return self._from_anchor(z, rank=anchor_rank)

    def re_eta(self, z):
        return self.eta(z).real


def eta(ev: EtaEvaluator, z, path_hint=None):
    return ev.eta(z, path_hint)


# ---------------------------------------------------------------- tracing

@dataclass(frozen=True)
class TraceOptions:
    traj_tol: float = 1e-8
    snap_rel: float = 1e-6
    esc_factor: float = 10.0
    far_factor: float = 40.0
    zero_cluster: float = 1e-7
    maxpts: int = 40000


@dataclass
class Trajectory:
    points: np.ndarray
    start: int
    end: int
    kind: str
    length: float
    start_dir: int = -1
    end_dir: int = -1
    angle_index: int = -1
    angle_dev: float = 0.0
    start_angle_index: int = -1
    status: int = SNAPPED

    def to_dict(self, node_ids):
        def nid(i, k):
            return node_ids[i] if i >= 0 else f"inf{k}"
        return {
            "start": nid(self.start, self.start_angle_index),
            "end": nid(self.end, self.angle_index),
            "kind": self.kind,
            "length": self.length,
            "polyline": [[z.real, z.imag] for z in self.points],
        }


@dataclass
class CriticalNode:
    id: str
    kind: str
    z: complex
    order: int
    on_graph: bool = True
    re_eta: float = 0.0
    directions: np.ndarray = None


def _departure_dirs(Qc, c, m):
    """Directions where ``Q (z - c)**2 < 0`` to leading order at a zero of order ``m``."""
    dc = Qc
    for _ in range(m):
        dc = npoly.polyder(dc)
    C = horner(dc, c) / math.factorial(m)
    n = np.arange(m + 2)
    return (math.pi - np.angle(C) + TWO_PI * n) / (m + 2)


def _cluster(zs, tol):
    groups = []
    for z in zs:
        for g in groups:
            if abs(g[0] - z) <= tol:
                g.append(z)
                break
        else:
            groups.append([z])
    return [(np.mean(g), len(g)) for g in groups]


class _Tracer:
    def __init__(self, ev: EtaEvaluator, opts: TraceOptions):
        self.ev = ev
        self.opts = opts
        pot, ep, h = ev.pot, ev.ep, ev.h
        self.p = pot.p
        self.Qc = npoly.polymul(npoly.polymul(h.coeffs, h.coeffs), ep.R_coeffs) / 4.0
        nodes = []
        for j in range(ep.q):
            nodes.append(CriticalNode(f"a{j + 1}", "a", ep.a[j], 1))
            nodes.append(CriticalNode(f"b{j + 1}", "b", ep.b[j], 1))
        for i, (z, mult) in enumerate(_cluster(list(h.zeros), opts.zero_cluster)):
            nodes.append(CriticalNode(f"z{i + 1}", "zero", complex(z), 2 * mult, False))
        self.nodes = nodes
        self.crit = np.array([n.z for n in nodes], dtype=complex)
        self.scale = 1.0 + float(np.max(np.abs(self.crit)))
        self.snap_r = opts.snap_rel * self.scale
        self.r_esc = opts.esc_factor * self.scale
        self.r_far = opts.far_factor * self.r_esc
        for n in nodes:
            n.directions = _departure_dirs(self.Qc, n.z, n.order)

    def near_dist(self, i):
        d = np.abs(self.crit - self.crit[i])
        d[i] = np.inf
        return float(min(d.min(), self.scale))

    def launch(self, i, n):
        node = self.nodes[i]
        phi = node.directions[n]
        r0 = 1e-3 * self.near_dist(i)
        w = r0 * np.exp(1j * phi)
        z0 = node.z + w
        d0 = -2.0 * np.sqrt(horner(self.Qc, z0))
        v0 = 1j * np.conj(d0) / abs(d0)
        if (v0 * np.exp(-1j * phi)).real < 0:
            d0 = -d0
        eta0 = self.local_eta(node.z, z0, d0)
        for _ in range(3):
            # project the launch point onto the level of the node
            dz = -eta0.real * np.conj(d0) / abs(d0) ** 2
            if abs(dz) < 1e-14 * self.scale:
                break
            z0 = z0 + dz
            d1 = -2.0 * np.sqrt(horner(self.Qc, z0))
            d0 = d1 if (d1 * np.conj(d0)).real > 0 else -d1
            eta0 = self.local_eta(node.z, z0, d0)
        return self._run(z0, d0, eta0, 1.0, i, r0)

    def local_eta(self, c, z0, d0):
        """``int_c^{z0} eta'`` on the branch matching ``d0`` at ``z0``."""
        def f(s):
            v = -2.0 * np.sqrt(horner(self.Qc, s))
            return np.where((v * np.conj(d0)).real < 0, -v, v)
        val, _ = integrate_leg(f, c, z0, True, False, tol=1e-15, nmax=256)
        return val

    def _run(self, z0, d0, eta0, sgn, start, h0):
        pts, n, status, node, eta_end = trace_kernel(
            self.Qc, self.crit, complex(z0), complex(d0), complex(eta0), 0.0,
            float(sgn), int(start), float(h0), 1e-13 * self.scale, 0.05 * self.scale,
            self.snap_r, self.r_esc, self.r_far, 200.0 * self.r_far, self.opts.maxpts)
        pts = pts[:n].copy()
        if start >= 0:
            pts = np.concatenate([[self.crit[start]], pts])
        return pts, int(status), int(node)

    def arrival_dir(self, pts, node):
        """Index of the departure direction at ``node`` matching the arrival."""
        z = self.crit[node]
        rho = 1e-2 * self.near_dist(node)
        dist = np.abs(pts - z)
        idx = np.nonzero(dist > rho)[0]
        ref = pts[idx[-1]] if len(idx) else pts[0]
        ang = np.angle(ref - z)
        dirs = self.nodes[node].directions
        diff = np.abs(np.angle(np.exp(1j * (dirs - ang))))
        k = int(np.argmin(diff))
        return k, float(diff[k])


@dataclass
class CriticalGraph:
    """Nodes, traced edges and census of the critical graph."""

    p: int
    q: int
    nodes: list
    edges: list
    summary: dict
    scale: float
    r_far: float
    diagnostics: dict = field(default_factory=dict)

    @property
    def node_ids(self):
        return [n.id for n in self.nodes]

    def edges_of_kind(self, kind):
        return [e for e in self.edges if e.kind == kind]

    def cut_polylines(self):
        """Traced cut arcs keyed by 0-based cut index (oriented ``a_j -> b_j``)."""
        out = {}
        for e in self.edges_of_kind("cut"):
            j = int(self.nodes[e.start].id[1:]) - 1
            pts = e.points if self.nodes[e.start].kind == "a" else e.points[::-1]
            out[j] = pts
        return out

    def to_json(self, **extra) -> str:
        ids = self.node_ids
        nodes = [{"id": n.id, "kind": n.kind, "position": [n.z.real, n.z.imag],
                  "order": n.order, "on_graph": bool(n.on_graph)} for n in self.nodes]
        for k, th in enumerate(asymptotic_angles(self.p)):
            nodes.append({"id": f"inf{k}", "kind": "infinity", "angle": float(th),
                          "order": -(4 * self.p + 2), "on_graph": True})
        doc = {"nodes": nodes, "edges": [e.to_dict(ids) for e in self.edges],
               "census": self.summary}
        doc.update(extra)
        return json.dumps(doc, indent=1, default=float)


def trace_trajectory(ev: EtaEvaluator, start: int, direction: int, opts: TraceOptions = None):
    """Trace one trajectory leaving critical node ``start`` along local direction ``direction``.

    Node indices follow ``a1, b1, a2, b2, ..., z1, z2, ...``.
    """
    tr = _Tracer(ev, opts or TraceOptions())
    return _trace_one(tr, start, direction)


def _edge_kind(tr, i, j):
    ni, nj = tr.nodes[i], tr.nodes[j]
    if {ni.kind, nj.kind} == {"a", "b"}:
        ki, kj = int(ni.id[1:]), int(nj.id[1:])
        if ki == kj:
            return "cut"
        a, b = (ki, kj) if ni.kind == "a" else (kj, ki)
        if a == b + 1:
            return "gap-connection"
    return "connection"


def _trace_one(tr, i, n):
    pts, status, node = tr.launch(i, n)
    length = float(np.sum(np.abs(np.diff(pts))))
    if status == SNAPPED:
        k, dev = tr.arrival_dir(pts, node)
        return Trajectory(pts, i, node, _edge_kind(tr, i, node), length, n, k,
                          angle_dev=dev, status=status)
    if status == ESCAPED:
        k, dev = angle_index(float(np.angle(pts[-1])), tr.p)
        return Trajectory(pts, i, -1, "ray", length, n, -1, k, dev, status=status)
    raise TracingError(f"trajectory from {tr.nodes[i].id} dir {n} failed (status {status})")


def _find_hump_start(tr, k):
    p = tr.p
    th = asymptotic_angles(p)[k]
    r = 0.9 * tr.r_esc
    half = math.pi / (4 * p)
    grid = th + np.linspace(-half, half, 13)
    f = np.array([tr.ev.re_eta(r * np.exp(1j * g)) for g in grid])
    cands = [i for i in range(len(grid) - 1) if np.sign(f[i]) != np.sign(f[i + 1])]
    if not cands:
        raise TracingError(f"no level crossing near angle index {k}")
    i = min(cands, key=lambda i: abs(0.5 * (grid[i] + grid[i + 1]) - th))
    g0 = optimize.brentq(lambda g: tr.ev.re_eta(r * np.exp(1j * g)), grid[i], grid[i + 1],
                         xtol=1e-15, rtol=1e-15)
    return r * np.exp(1j * g0)


def _trace_hump(tr, k):
    zs = _find_hump_start(tr, k)
    d0 = complex(tr.ev.deta(zs))
    eta0 = complex(tr.ev.eta(zs))
    v0 = 1j * np.conj(d0) / abs(d0)
    sgn_in = 1.0 if (v0 * np.conj(zs)).real < 0 else -1.0
    h0 = 0.01 * tr.scale
    pin, st_in, _ = tr._run(zs, d0, 1j * eta0.imag, sgn_in, -1, h0)
    pout, st_out, _ = tr._run(zs, d0, 1j * eta0.imag, -sgn_in, -1, h0)
    if st_in != ESCAPED or st_out != ESCAPED:
        raise TracingError(f"hump near angle index {k} did not escape")
    pts = np.concatenate([pout[::-1], pin[1:]])
    k0, dev0 = angle_index(float(np.angle(pts[0])), tr.p)
    k1, dev1 = angle_index(float(np.angle(pts[-1])), tr.p)
    t = Trajectory(pts, -1, -1, "hump", float(np.sum(np.abs(np.diff(pts)))),
                   angle_index=k1, angle_dev=max(abs(dev0), abs(dev1)),
                   start_angle_index=k0, status=ESCAPED)
    return t


def build_critical_graph(ev: EtaEvaluator, opts: TraceOptions = None, strict=True):
    """Trace every critical trajectory on ``Re eta = 0`` and add the humps.

    With ``strict`` a census mismatch raises :class:`CensusViolation`;
    otherwise it is only recorded in ``summary``.
    """
    opts = opts or TraceOptions()
    tr = _Tracer(ev, opts)
    p, q = ev.pot.p, ev.ep.q
    for node in tr.nodes:
        if node.kind == "zero":
            node.re_eta = float(ev.re_eta(node.z))
            node.on_graph = abs(node.re_eta) <= opts.traj_tol * (1.0 + abs(node.re_eta))
        else:
            node.re_eta = 0.0
    edges = []
    used = set()
    for i, node in enumerate(tr.nodes):
        if not node.on_graph:
            continue
        for n in range(len(node.directions)):
            if (i, n) in used:
                continue
            t = _trace_one(tr, i, n)
            used.add((i, n))
            if t.end >= 0:
                if (t.end, t.end_dir) in used:
                    raise TracingError("trajectory arrives along an already traced direction")
                used.add((t.end, t.end_dir))
            edges.append(t)
    nang = 4 * p
    hit = np.zeros(nang, dtype=int)
    for e in edges:
        if e.kind == "ray":
            hit[e.angle_index] += 1
    humps = []
    for k in range(nang):
        if hit[k] == 0:
            t = _trace_hump(tr, k)
            if hit[t.angle_index] or hit[t.start_angle_index]:
                raise TracingError("hump lands on an occupied angle")
            hit[t.angle_index] += 1
            hit[t.start_angle_index] += 1
            humps.append(t)
    edges += humps
    counts = {kind: len([e for e in edges if e.kind == kind])
              for kind in ("cut", "gap-connection", "connection", "ray", "hump")}
    exp_humps = 2 * (p - q) if p > q else 0
    exp_gaps = 2 * (q - p) if p < q else None
    bij = bool(np.all(hit == 1))
    dev = max([abs(e.angle_dev) for e in edges if e.kind in ("ray", "hump")], default=0.0)
    census_ok = bij and counts["hump"] == exp_humps and (
        exp_gaps is None or counts["gap-connection"] == exp_gaps)
    summary = dict(counts)
    summary.update({
        "angle_hits": hit.tolist(), "bijection": bij, "expected_humps": exp_humps,
        "expected_gap_connections": exp_gaps, "max_angle_dev_deg": math.degrees(dev),
        "census_ok": bool(census_ok),
    })
    g = CriticalGraph(p, q, tr.nodes, edges, summary, tr.scale, tr.r_far)
    if strict and not census_ok:
        raise CensusViolation(f"graph census violation: {summary}")
    return g


# ---------------------------------------------------------------- faces

def _dart_table(g: CriticalGraph):
    """Outgoing darts per vertex; vertex ``len(nodes)`` is infinity."""
    INF = len(g.nodes)
    p = g.p
    th = asymptotic_angles(p)
    darts = []  # (origin, target, angle at origin, edge index, forward)
    for ei, e in enumerate(g.edges):
        if e.kind == "hump":
            a0 = -th[e.start_angle_index]
            a1 = -th[e.angle_index]
            darts.append((INF, INF, a0, ei, True))
            darts.append((INF, INF, a1, ei, False))
            continue
        u = e.start
        au = g.nodes[u].directions[e.start_dir]
        if e.end >= 0:
            v = e.end
            av = g.nodes[v].directions[e.end_dir]
        else:
            v = INF
            av = -th[e.angle_index]
        darts.append((u, v, au, ei, True))
        darts.append((v, u, av, ei, False))
    rot = {}
    for di, d in enumerate(darts):
        rot.setdefault(d[0], []).append(di)
    for v in rot:
        rot[v].sort(key=lambda di: darts[di][2] % TWO_PI)
    return darts, rot


def graph_faces(g: CriticalGraph):
    """Faces of the embedded graph as cycles of darts (face on the left).

    Returns ``(faces, face_of_dart, darts, rot)``.
    """
    darts, rot = _dart_table(g)
    pos = {}
    for v, lst in rot.items():
        for i, di in enumerate(lst):
            pos[di] = (v, i)

    def rev(di):
        return di ^ 1

    def nxt(di):
        r = rev(di)
        v, i = pos[r]
        lst = rot[v]
        return lst[(i - 1) % len(lst)]

    face_of = [-1] * len(darts)
    faces = []
    for d0 in range(len(darts)):
        if face_of[d0] >= 0:
            continue
        cyc = []
        d = d0
        while face_of[d] < 0:
            face_of[d] = len(faces)
            cyc.append(d)
            d = nxt(d)
        faces.append(cyc)
    return faces, face_of, darts, rot


def sector_face(g, vertex, dart_from, faces_data=None):
    """Face containing the sector leaving ``vertex`` CCW from dart ``dart_from``."""
    faces, face_of, darts, rot = faces_data or graph_faces(g)
    return face_of[dart_from]


def infinity_sector_dart(g, darts, rot, theta):
    """Dart at infinity whose left face contains the far direction ``theta``."""
    INF = len(g.nodes)
    th = asymptotic_angles(g.p)
    best = None
    for di in rot.get(INF, []):
        k = angle_index(-darts[di][2], g.p)[0]
        # left face of dart k spans z-directions from th[k-1] to th[k]
        lo = th[k] - math.pi / (2 * g.p)
        if (theta - lo) % TWO_PI < math.pi / (2 * g.p):
            best = di
    return best


@dataclass
class GeodesicPolygon:
    face: int
    vertices: list
    orders: list
    angles: list
    interior: list
    ring: np.ndarray


def _dart_points(g, darts, di):
    o, t, _, ei, fwd = darts[di]
    pts = g.edges[ei].points
    return pts if fwd else pts[::-1]


def face_polygon(g, face, faces_data):
    """Vertices, interior angles and a closed ring for one face."""
    faces, face_of, darts, rot = faces_data
    INF = len(g.nodes)
    cyc = faces[face]
    verts, orders, angles = [], [], []
    ring = []
    R = g.r_far * 1.05
    for idx, di in enumerate(cyc):
        o, t, a_out, _, _ = darts[di]
        prev = cyc[idx - 1]
        a_in = darts[prev ^ 1][2]
        theta = (a_in - a_out) % TWO_PI
        if prev ^ 1 == di:
            theta = TWO_PI
        if o == INF:
            verts.append("inf")
            orders.append(-(4 * g.p + 2))
            # the far arc runs CCW in z from the incoming to the outgoing direction
            zin = -a_in
            span = theta
            arc = np.exp(1j * (zin + np.linspace(0.0, span, max(4, int(span * 16)))))
            ring.extend(R * arc)
        else:
            verts.append(g.nodes[o].id)
            orders.append(g.nodes[o].order)
        angles.append(theta)
        ring.extend(_dart_points(g, darts, di))
    ring = np.array(ring)
    return verts, orders, angles, ring


def teichmuller_audit(g: CriticalGraph, face=None, faces_data=None, tol=0.05):
    """Check ``#V - 2 = sum (ord+2) theta / 2 pi + sum interior ord`` on faces.

    ``face`` selects one face; by default every face is audited. Finite
    faces with one or two vertices are always flagged.
    """
    from matplotlib.path import Path

    faces_data = faces_data or graph_faces(g)
    faces = faces_data[0]
    sel = range(len(faces)) if face is None else [face]
    off = [n for n in g.nodes if not n.on_graph]
    reports = []
    for f in sel:
        verts, orders, angles, ring = face_polygon(g, f, faces_data)
        interior = []
        if off and len(ring) >= 3:
            path = Path(np.column_stack([ring.real, ring.imag]))
            for n in off:
                if path.contains_point((n.z.real, n.z.imag)):
                    interior.append(n)
        lhs = len(verts) - 2
        rhs = sum((o + 2) * th / TWO_PI for o, th in zip(orders, angles))
        rhs += sum(n.order for n in interior)
        finite = "inf" not in verts
        singular = finite and len(verts) <= 2
        reports.append({
            "face": f, "vertices": verts, "orders": orders,
            "angles_deg": [math.degrees(a) for a in angles],
            "interior": [n.id for n in interior], "lhs": lhs, "rhs": rhs,
            "ok": bool(abs(lhs - rhs) <= tol and not singular),
            "singular_finite": singular,
        })
    return reports if face is None else reports[0]
