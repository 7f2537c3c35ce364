"""Job configuration, the solve/classify/graph/scan drivers and their file outputs."""
from __future__ import annotations

import copy
import csv
import hashlib
import io
import json
import os
import platform
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from importlib import metadata
from pathlib import Path

import jsonschema
import numpy as np

from .endpoint_system import SolveOptions, solve_endpoints
from .errors import (CensusViolation, ConfigError, EqmError, QuadratureStalled,
                     SolverError, TracingError)
from .measure import EquilibriumMeasure, compute_h, lagrange_multiplier
from .poly_core import EndpointSet, Potential
from .quad_diff import EtaEvaluator, TraceOptions, build_critical_graph
from .regime import (RegimeOptions, SeedCache, classify, classify_q,
                     stable_land_mask, symmetric_seeds)

SCHEMA_VERSION = 1

EXIT_OK, EXIT_CONFIG, EXIT_SOLVER, EXIT_AMBIGUOUS, EXIT_COVERAGE = 0, 1, 2, 3, 4

_pair = {"type": "array", "items": {"type": "number"}, "minItems": 2, "maxItems": 2}

CONFIG_SCHEMA = {
    "type": "object",
    "additionalProperties": False,
    "required": ["schema_version", "potential"],
    "properties": {
        "schema_version": {"const": SCHEMA_VERSION},
        "mode": {"enum": ["solve", "classify", "graph", "scan"]},
        "potential": {
            "type": "object",
            "additionalProperties": False,
            "required": ["p", "t"],
            "properties": {
                "p": {"type": "integer", "minimum": 1},
                "t": {"type": "array", "items": _pair},
            },
        },
        "q": {"anyOf": [{"type": "integer", "minimum": 1}, {"const": "auto"}]},
        "seed": {"anyOf": [
            {"enum": ["symmetric", "cache"]},
            {"type": "object", "additionalProperties": False, "required": ["a", "b"],
             "properties": {"a": {"type": "array", "items": _pair},
                            "b": {"type": "array", "items": _pair}}},
        ]},
        "numerics": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "newton_tol": {"type": "number", "exclusiveMinimum": 0},
                "quad_tol": {"type": "number", "exclusiveMinimum": 0},
                "traj_tol": {"type": "number", "exclusiveMinimum": 0},
                "max_iter": {"type": "integer", "minimum": 1},
                "multistart": {"type": "integer", "minimum": 0},
                "grid_resolution": {"type": "integer", "minimum": 11},
                "window": {"type": "array", "items": {"type": "number"},
                           "minItems": 4, "maxItems": 4},
            },
        },
        "scan": {
            "type": "object",
            "additionalProperties": False,
            "required": ["axes"],
            "properties": {
                "axes": {
                    "type": "array", "minItems": 1, "maxItems": 2,
                    "items": {
                        "type": "object",
                        "additionalProperties": False,
                        "required": ["index", "component", "range", "n"],
                        "properties": {
                            "index": {"type": "integer", "minimum": 1},
                            "component": {"enum": ["re", "im"]},
                            "range": {"type": "array", "items": {"type": "number"},
                                      "minItems": 2, "maxItems": 2},
                            "n": {"type": "integer", "minimum": 1},
                        },
                    },
                },
                "block_rows": {"type": "integer", "minimum": 1},
                "all_q": {"type": "boolean"},
            },
        },
        "output": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "dir": {"type": "string"},
                "prefix": {"type": "string"},
            },
        },
    },
}


@dataclass
class JobConfig:
    """Validated job description; build with :meth:`from_dict` or :func:`load_config`."""

    pot: Potential
    mode: str = "solve"
    q: object = "auto"
    seed: object = "symmetric"
    numerics: dict = field(default_factory=dict)
    scan: dict = None
    out_dir: str = "out"
    prefix: str = ""
    raw: dict = field(default_factory=dict)

    @classmethod
    def from_dict(cls, doc):
        try:
            jsonschema.validate(doc, CONFIG_SCHEMA)
        except jsonschema.ValidationError as exc:
            path = "/".join(map(str, exc.absolute_path)) or "<root>"
            raise ConfigError(f"config error at {path}: {exc.message}") from None
        p = doc["potential"]["p"]
        t = [complex(*x) for x in doc["potential"]["t"]]
        if len(t) != 2 * p - 1:
            raise ConfigError(f"potential.t needs {2 * p - 1} coefficients, got {len(t)}")
        q = doc.get("q", "auto")
        if q != "auto" and q > 2 * p - 1:
            raise ConfigError(f"q={q} exceeds 2p-1={2 * p - 1}")
        seed = doc.get("seed", "symmetric")
        if isinstance(seed, dict):
            if len(seed["a"]) != len(seed["b"]) or (q != "auto" and len(seed["a"]) != q):
                raise ConfigError("explicit seed must give q points for both a and b")
            seed = EndpointSet(len(seed["a"]), [complex(*x) for x in seed["a"]],
                               [complex(*x) for x in seed["b"]])
        scan = doc.get("scan")
        mode = doc.get("mode", "scan" if scan else "solve")
        if mode == "scan":
            if scan is None:
                raise ConfigError("mode=scan needs a scan section")
            for ax in scan["axes"]:
                if ax["index"] > 2 * p - 1:
                    raise ConfigError(f"scan axis index {ax['index']} out of range")
        out = doc.get("output", {})
        return cls(Potential(p, tuple(t)), mode, q, seed, dict(doc.get("numerics", {})),
                   scan, out.get("dir", "out"), out.get("prefix", ""), copy.deepcopy(doc))

    def regime_options(self):
        n = self.numerics
        so = SolveOptions()
        so = replace(so, newton_tol=n.get("newton_tol", so.newton_tol),
                     quad_tol=n.get("quad_tol", so.quad_tol),
                     max_iter=n.get("max_iter", so.max_iter))
        to = replace(TraceOptions(), traj_tol=n.get("traj_tol", TraceOptions().traj_tol))
        ro = RegimeOptions()
        return replace(ro, solve=so, trace=to,
                       multistart=n.get("multistart", ro.multistart),
                       mask_resolution=n.get("grid_resolution", ro.mask_resolution))

    def config_hash(self):
        return hashlib.sha256(json.dumps(self.raw, sort_keys=True).encode()).hexdigest()


def load_config(path, overrides=None):
    """Read a JSON config; ``overrides`` are merged into ``numerics``/top level first."""
    try:
        doc = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    if not isinstance(doc, dict):
        raise ConfigError("config must be a JSON object")
    for k, v in (overrides or {}).items():
        if v is None:
            continue
        if k in ("newton_tol", "quad_tol", "traj_tol"):
            doc.setdefault("numerics", {})[k] = v
        else:
            doc[k] = v
    return JobConfig.from_dict(doc)


def provenance(cfg: JobConfig, opts: RegimeOptions = None):
    opts = opts or cfg.regime_options()
    try:
        version = metadata.version("artifact")
    except metadata.PackageNotFoundError:
        version = "unknown"
    return {
        "config_hash": cfg.config_hash(),
        "schema_version": SCHEMA_VERSION,
        "artifact_version": version,
        "tolerances": {
            "newton_tol": opts.solve.newton_tol, "quad_tol": opts.solve.quad_tol,
            "traj_tol": opts.trace.traj_tol, "zero_dist_rel": opts.zero_dist_rel,
        },
        "python": platform.python_version(),
        "numpy": np.__version__,
    }


def _cplx(z):
    return [float(np.real(z)), float(np.imag(z))]


def _write_json(path, doc):
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(doc, indent=1, default=_json_default))


def _json_default(o):
    if isinstance(o, (complex, np.complexfloating)):
        return _cplx(o)
    if isinstance(o, np.integer):
        return int(o)
    if isinstance(o, np.floating):
        return float(o)
    if isinstance(o, np.bool_):
        return bool(o)
    if isinstance(o, np.ndarray):
        return o.tolist()
    raise TypeError(type(o))


def _out(cfg, name):
    return Path(cfg.out_dir) / f"{cfg.prefix}{name}"


def _seeds_for(cfg, q, cache):
    if isinstance(cfg.seed, EndpointSet):
        return [cfg.seed]
    if cfg.seed == "cache" and cache is not None:
        return cache.nearest(cfg.pot, q)
    return symmetric_seeds(cfg.pot, q, cfg.regime_options())


# ---------------------------------------------------------------- solve

def run_solve(cfg: JobConfig, cache: SeedCache = None, log=print):
    """Solve the endpoint equations and write ``solve.json``; returns an exit code."""
    opts = cfg.regime_options()
    q = cfg.q
    if q == "auto":
        c = classify(cfg.pot, opts, cache)
        if c.selected_q is None:
            log("no unique regular q found; specify q explicitly")
            return EXIT_SOLVER
        q = c.selected_q
    seeds = _seeds_for(cfg, q, cache)
    if not seeds:
        log(f"no seed available for q={q}; give explicit endpoints")
        return EXIT_SOLVER
    sol, err = None, None
    for s in seeds:
        try:
            sol = solve_endpoints(cfg.pot, q, s, opts.solve)
            break
        except (SolverError, QuadratureStalled) as exc:
            err = exc
    if sol is None:
        log(f"solver failed: {type(err).__name__}: {err}")
        return EXIT_SOLVER
    ep = sol.endpoints
    h = compute_h(cfg.pot, ep)
    doc = {"provenance": provenance(cfg, opts), "potential": {"p": cfg.pot.p,
           "t": [_cplx(z) for z in cfg.pot.t]}, "solve": sol.to_dict(),
           "h_coeffs": [_cplx(z) for z in h.coeffs], "h_zeros": [_cplx(z) for z in h.zeros]}
    em = EquilibriumMeasure(cfg.pot, ep, h)
    mass = em.total_mass()
    doc["mass"] = _cplx(mass)
    doc["mass_ok"] = bool(abs(mass - 1) < 1e-8)
    try:
        doc["lagrange"] = _cplx(lagrange_multiplier(cfg.pot, ep, h))
    except EqmError as exc:
        doc["lagrange"] = None
        doc["lagrange_error"] = str(exc)
    if cache is not None:
        cache.add(cfg.pot, ep)
    _write_json(_out(cfg, "solve.json"), doc)
    return EXIT_OK


# ---------------------------------------------------------------- classify

def run_classify(cfg: JobConfig, cache: SeedCache = None, log=print):
    opts = cfg.regime_options()
    qs = None if cfg.q == "auto" else [cfg.q]
    extra = None
    if isinstance(cfg.seed, EndpointSet):
        extra = {cfg.seed.q: [cfg.seed]}
    c = classify(cfg.pot, opts, cache, extra_seeds=extra, qs=qs)
    doc = c.to_dict()
    doc["provenance"] = provenance(cfg, opts)
    _write_json(_out(cfg, "classify.json"), doc)
    log(f"verdict={c.verdict} q={c.selected_q}")
    return EXIT_OK if c.verdict == "regular" else EXIT_AMBIGUOUS


# ---------------------------------------------------------------- graph

def render_graph_svg(g, ep, path, mask=None, window=None, prov=None):
    """Trajectories as paths, critical points as markers, optional stable lands shaded."""
    from matplotlib.figure import Figure
    fig = Figure(figsize=(6, 6))
    ax = fig.add_subplot(111)
    pts = np.array([n.z for n in g.nodes])
    if window is None:
        span = float(np.max(np.abs(pts))) + 1.0
        window = (-2.5 * span, 2.5 * span, -2.5 * span, 2.5 * span)
    if mask is not None:
        neg = np.where(mask.labels > 0, 1.0, np.nan)
        ax.pcolormesh(mask.xs, mask.ys, neg, cmap="Greys", vmin=0, vmax=4,
                      shading="nearest", rasterized=False)
    colors = {"cut": "C3", "ray": "C0", "hump": "C2", "gap-connection": "C1",
              "connection": "C4"}
    for e in g.edges:
        ax.plot(e.points.real, e.points.imag, "-", color=colors.get(e.kind, "k"),
                lw=2.0 if e.kind == "cut" else 1.0)
    for n in g.nodes:
        mk = {"a": "o", "b": "s", "zero": "x"}[n.kind]
        ax.plot(n.z.real, n.z.imag, mk, color="k", ms=5)
    ax.set_xlim(window[0], window[1])
    ax.set_ylim(window[2], window[3])
    ax.set_aspect("equal")
    ax.set_xlabel("Re z")
    ax.set_ylabel("Im z")
    fig.savefig(path, format="svg", metadata=_svg_meta(prov) if prov else None)


def run_graph(cfg: JobConfig, cache: SeedCache = None, svg=False, mask=False, log=print):
    opts = cfg.regime_options()
    q = cfg.q
    if q == "auto":
        c = classify(cfg.pot, opts, cache)
        if c.selected_q is None:
            log("no unique regular q found; specify q explicitly")
            return EXIT_SOLVER
        q = c.selected_q
    sol, err = None, None
    for s in _seeds_for(cfg, q, cache):
        try:
            sol = solve_endpoints(cfg.pot, q, s, opts.solve)
            break
        except (SolverError, QuadratureStalled) as exc:
            err = exc
    if sol is None:
        log(f"solver failed: {err}")
        return EXIT_SOLVER
    ep = sol.endpoints
    h = compute_h(cfg.pot, ep)
    ev = EtaEvaluator(cfg.pot, ep, h)
    try:
        g = build_critical_graph(ev, opts.trace, strict=True)
    except (TracingError, CensusViolation) as exc:
        log(f"tracing failed: {exc}")
        partial = {"provenance": provenance(cfg, opts), "error": str(exc),
                   "endpoints": {"a": [_cplx(z) for z in ep.a], "b": [_cplx(z) for z in ep.b]},
                   "h_zeros": [_cplx(z) for z in h.zeros]}
        try:
            gp = build_critical_graph(ev, opts.trace, strict=False)
            partial["graph"] = json.loads(gp.to_json())
        except EqmError:
            pass
        _write_json(_out(cfg, "graph.partial.json"), partial)
        return EXIT_SOLVER
    doc = json.loads(g.to_json())
    doc["provenance"] = provenance(cfg, opts)
    _write_json(_out(cfg, "graph.json"), doc)
    if svg:
        m = None
        window = tuple(cfg.numerics["window"]) if "window" in cfg.numerics else None
        if mask:
            from .poly_core import BranchedSqrtR
            evt = EtaEvaluator(cfg.pot, ep, h, BranchedSqrtR(ep, g.cut_polylines()))
            m = stable_land_mask(evt, window, opts.mask_resolution)
            window = m.window
        render_graph_svg(g, ep, _out(cfg, "graph.svg"), m, window, doc["provenance"])
    return EXIT_OK


# ---------------------------------------------------------------- scan

VERDICTS = ("regular", "ambiguous", "singular", "unsolvable")


@dataclass
class ScanCell:
    i: int
    j: int
    coords: tuple
    verdict: str
    q: int = None
    endpoints: EndpointSet = None
    residual: float = float("nan")
    wall_ms: float = 0.0
    digest: dict = field(default_factory=dict)
    multistart: bool = False

    @property
    def resolved(self):
        return self.verdict != "unsolvable"


@dataclass
class ScanResult:
    shape: tuple
    axes: list
    cells: list
    provenance: dict

    def verdict_grid(self):
        g = np.empty(self.shape, dtype=object)
        for c in self.cells:
            g[c.i, c.j] = c.verdict if c.verdict != "regular" else f"q{c.q}"
        return g

    def resolved_fraction(self):
        return float(np.mean([c.resolved for c in self.cells]))

    def to_csv(self, qmax, with_provenance=True):
        """CSV table; the first line is a ``# provenance: {...}`` comment unless disabled."""
        buf = io.StringIO()
        if with_provenance:
            buf.write("# provenance: " + json.dumps(self.provenance, sort_keys=True) + "\n")
        w = csv.writer(buf, lineterminator="\n")
        head = ["re_coord", "im_coord", "verdict", "q"]
        for k in range(1, qmax + 1):
            head += [f"a{k}_re", f"a{k}_im", f"b{k}_re", f"b{k}_im"]
        head += ["residual", "wall_ms"]
        w.writerow(head)
        for c in sorted(self.cells, key=lambda c: (c.i, c.j)):
            row = [repr(c.coords[0]), repr(c.coords[1]), c.verdict,
                   "" if c.q is None else c.q]
            ep = c.endpoints
            for k in range(qmax):
                if ep is not None and k < ep.q:
                    row += [repr(ep.a[k].real), repr(ep.a[k].imag),
                            repr(ep.b[k].real), repr(ep.b[k].imag)]
                else:
                    row += ["", "", "", ""]
            row += [repr(c.residual), f"{c.wall_ms:.1f}"]
            w.writerow(row)
        return buf.getvalue()

    def to_dict(self):
        return {
            "provenance": self.provenance,
            "shape": list(self.shape),
            "axes": self.axes,
            "resolved_fraction": self.resolved_fraction(),
            "multistart_cells": int(sum(c.multistart for c in self.cells)),
            "counts": {v: int(sum(c.verdict == v for c in self.cells)) for v in VERDICTS},
            "cells": [{"i": c.i, "j": c.j, "coords": list(c.coords), "verdict": c.verdict,
                       "q": c.q, "digest": c.digest} for c in self.cells],
        }


def scan_points(pot, axes):
    """Grid coordinates and the potential at every cell (row index = second axis)."""
    vals = [np.linspace(ax["range"][0], ax["range"][1], ax["n"]) for ax in axes]
    if len(axes) == 1:
        vals.append(np.array([None]))
    ny, nx = len(vals[1]), len(vals[0])
    grid = {}
    for i in range(ny):
        for j in range(nx):
            t = list(pot.t)
            for ax, v in zip(axes, (vals[0][j], vals[1][i])):
                if v is None:
                    continue
                k = ax["index"] - 1
                if ax["component"] == "re":
                    t[k] = complex(v, t[k].imag)
                else:
                    t[k] = complex(t[k].real, v)
            grid[i, j] = tuple(t)
    return vals, grid


def _coords(axes, t):
    a0 = axes[0]
    if len(axes) == 2 and axes[1]["index"] == a0["index"]:
        z = t[a0["index"] - 1]
        return (z.real, z.imag)
    out = []
    for ax in axes:
        z = t[ax["index"] - 1]
        out.append(z.real if ax["component"] == "re" else z.imag)
    if len(out) == 1:
        z = t[a0["index"] - 1]
        out = [z.real, z.imag]
    return tuple(float(x) for x in out)


def _scan_cell(p, t, neighbor_sols, prefer_q, opts, cache_snapshot, all_q=False):
    """Classify one cell from neighbour seeds; returns (verdict, q, reports, multistart used).

    ``q`` values are tried starting from the neighbour's regular ``q``. Unless
    ``all_q`` is set the sweep stops at the first regular ``q``, so
    ambiguity is only detected by :func:`classify` or with ``all_q``.
    """
    pot = Potential(p, t)
    reports = {}
    order = list(range(1, 2 * p))
    if prefer_q in order:
        order.remove(prefer_q)
        order.insert(0, prefer_q)
    used_multi = False
    for q in order:
        extra = list(neighbor_sols.get(q, []))
        rep = classify_q(pot, q, opts, cache_snapshot, extra, multistart=True,
                         exhaustive=False)
        if rep.diagnostics.get("seed_source") == "multistart":
            used_multi = True
        reports[q] = rep
        if rep.verdict == "regular" and not all_q:
            break
    regular = [q for q, r in reports.items() if r.verdict == "regular"]
    if len(regular) == 1:
        verdict, q = "regular", regular[0]
    elif len(regular) > 1:
        verdict, q = "ambiguous", None
    elif reports and all(r.verdict == "singular" for r in reports.values()):
        verdict, q = "singular", None
    else:
        verdict, q = "unsolvable", None
    return verdict, q, reports, used_multi


def _scan_block(args):
    """Boustrophedon sweep over rows ``rows`` of the grid; neighbours only inside the block."""
    p, grid, rows, nx, axes, opts, cache_json, all_q = args
    cache = SeedCache.from_json(cache_json) if cache_json else None
    sols = {}
    qsel = {}
    out = []
    for r_k, i in enumerate(rows):
        cols = range(nx) if r_k % 2 == 0 else range(nx - 1, -1, -1)
        prev = None
        for j in cols:
            neigh = [c for c in (prev, (i - 1, j) if r_k > 0 else None) if c is not None]
            nsols = {}
            for c in neigh:
                for q, ep in sols.get(c, {}).items():
                    nsols.setdefault(q, []).append(ep)
            pq = next((qsel[c] for c in neigh if qsel.get(c)), None)
            t = grid[i, j]
            t0 = time.perf_counter()
            try:
                verdict, q, reps, multi = _scan_cell(p, t, nsols, pq, opts, cache, all_q)
            except EqmError as exc:
                verdict, q, reps, multi = "unsolvable", None, {}, False
            wall = 1e3 * (time.perf_counter() - t0)
            sols[i, j] = {k: r.endpoints for k, r in reps.items() if r.endpoints is not None}
            qsel[i, j] = q
            sel = reps.get(q) if q else None
            digest = {str(k): {"verdict": r.verdict, "conditions": r.conditions,
                               "hint": r.boundary_type_hint} for k, r in reps.items()}
            out.append(ScanCell(i, j, _coords(axes, t), verdict, q,
                                sel.endpoints if sel else None,
                                sel.residual_norm if sel else float("nan"), wall, digest,
                                multi))
            prev = (i, j)
    return out


def run_scan_grid(cfg: JobConfig, threads=1, cache: SeedCache = None, progress=None):
    """Sweep the configured slice; returns a :class:`ScanResult`.

    Rows are split into fixed blocks of ``scan.block_rows`` rows. Each block
    is swept independently, so the verdicts do not depend on ``threads``.
    """
    opts = cfg.regime_options()
    axes = cfg.scan["axes"]
    vals, grid = scan_points(cfg.pot, axes)
    ny, nx = len(vals[1]), len(vals[0])
    block = cfg.scan.get("block_rows", 8)
    blocks = [list(range(s, min(s + block, ny))) for s in range(0, ny, block)]
    cache_json = cache.to_json() if cache is not None else None
    all_q = cfg.scan.get("all_q", False)
    jobs = [(cfg.pot.p, {k: v for k, v in grid.items() if k[0] in rows}, rows, nx, axes, opts,
             cache_json, all_q) for rows in blocks]
    cells = []
    if threads <= 1:
        for jb in jobs:
            cells += _scan_block(jb)
            if progress:
                progress(len(cells), nx * ny)
    else:
        with ProcessPoolExecutor(max_workers=threads) as pool:
            for res in pool.map(_scan_block, jobs):
                cells += res
                if progress:
                    progress(len(cells), nx * ny)
    if cache is not None:
        for c in cells:
            if c.endpoints is not None:
                cache.add(Potential(cfg.pot.p, grid[c.i, c.j]), c.endpoints)
    return ScanResult((ny, nx), axes, cells, provenance(cfg, opts))


def read_scan_csv(path):
    """Rows of a scan CSV as dicts, skipping ``#`` comment lines."""
    with open(path, newline="") as fh:
        return list(csv.DictReader(line for line in fh if not line.startswith("#")))


def _svg_meta(prov):
    return {"Description": "provenance: " + json.dumps(prov, sort_keys=True)}


def render_phase_svg(res: ScanResult, path):
    from matplotlib.colors import ListedColormap
    from matplotlib.figure import Figure
    ny, nx = res.shape
    code = np.full(res.shape, np.nan)
    for c in res.cells:
        code[c.i, c.j] = c.q if c.verdict == "regular" else (0 if c.verdict != "unsolvable" else -1)
    xs = np.array([c.coords[0] for c in sorted(res.cells, key=lambda c: (c.i, c.j))]).reshape(ny, nx)
    ys = np.array([c.coords[1] for c in sorted(res.cells, key=lambda c: (c.i, c.j))]).reshape(ny, nx)
    fig = Figure(figsize=(8, 5.5))
    ax = fig.add_subplot(111)
    cmap = ListedColormap(["#444444", "#ffffff", "#4c72b0", "#dd8452", "#55a868", "#c44e52",
                           "#8172b3", "#937860"])
    ax.pcolormesh(xs, ys, code, cmap=cmap, vmin=-1.5, vmax=6.5, shading="nearest")
    for q in sorted({c.q for c in res.cells if c.q}):
        ax.plot([], [], "s", color=cmap((q + 1.5) / 8.0), label=f"regular {q}-cut")
    ax.plot([], [], "s", color="#dddddd", label="no regular q")
    ax.legend(loc="upper right", fontsize=8)
    ax.set_xlabel("Re")
    ax.set_ylabel("Im")
    fig.savefig(path, format="svg", metadata=_svg_meta(res.provenance))


def run_scan(cfg: JobConfig, threads=None, cache: SeedCache = None, svg=False, log=print):
    if not threads:
        try:
            threads = int(os.environ.get("EQM_THREADS", "1"))
        except ValueError:
            raise ConfigError("EQM_THREADS must be an integer") from None
    t0 = time.perf_counter()
    res = run_scan_grid(cfg, threads, cache)
    qmax = 2 * cfg.pot.p - 1
    base = _out(cfg, "scan")
    base.parent.mkdir(parents=True, exist_ok=True)
    Path(f"{base}.csv").write_text(res.to_csv(qmax))
    doc = res.to_dict()
    doc["wall_s"] = time.perf_counter() - t0
    _write_json(Path(f"{base}.json"), doc)
    if svg:
        render_phase_svg(res, f"{base}.svg")
    frac = res.resolved_fraction()
    log(f"resolved {100 * frac:.1f}% of {len(res.cells)} cells")
    return (EXIT_OK if frac >= 0.9 else EXIT_COVERAGE), res
