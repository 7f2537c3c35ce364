"""
Phase map of the quartic field
==============================

Sweep sigma over [-4, 4] x [0, 5] on an 81 x 51 grid, coloured by the
regular number of cuts. With ``--write-golden`` the verdict grid is stored
as the regression reference used by the test suite.

Usage: python demos/phase_map.py [--threads N] [--write-golden]
"""

import argparse
import csv
import json
import time
from pathlib import Path

from eqm.scanner import load_config, render_phase_svg, run_scan_grid

root = Path(__file__).resolve().parents[1]
ap = argparse.ArgumentParser()
ap.add_argument("--threads", type=int, default=1)
ap.add_argument("--write-golden", action="store_true")
args = ap.parse_args()

cfg = load_config(root / "configs" / "quartic_scan.json")
t0 = time.perf_counter()
res = run_scan_grid(cfg, args.threads, progress=lambda k, n: print(f"\r{k}/{n}", end=""))
print(f"\n{time.perf_counter() - t0:.0f} s, resolved {100 * res.resolved_fraction():.1f}%")
print(json.dumps(res.to_dict()["counts"]))

# a coarse text rendering, top row = largest Im sigma
sym = {"q1": "1", "q2": "2", "q3": "3", "ambiguous": "?", "singular": ".", "unsolvable": "x"}
grid = res.verdict_grid()
for row in grid[::-1]:
    print("".join(sym[v] for v in row))

out = root / "out"
out.mkdir(exist_ok=True)
render_phase_svg(res, out / "phase_map.svg")

if args.write_golden:
    path = root / "tests" / "data" / "golden_quartic_81x51.csv"
    path.parent.mkdir(exist_ok=True)
    with open(path, "w", newline="") as fh:
        fh.write("# provenance: " + json.dumps(res.provenance, sort_keys=True) + "\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["re_coord", "im_coord", "verdict", "q"])
        for c in sorted(res.cells, key=lambda c: (c.i, c.j)):
            w.writerow([repr(c.coords[0]), repr(c.coords[1]), c.verdict,
                        "" if c.q is None else c.q])
    print("wrote", path)
