"""
Critical graph of a one-cut quartic field
=========================================

Trace the critical trajectories at sigma = 1 + i, print the census and the
face audit, and write an SVG with the stable lands shaded.
"""

import sys

from eqm.poly_core import BranchedSqrtR, Potential
from eqm.quad_diff import EtaEvaluator, teichmuller_audit
from eqm.measure import compute_h
from eqm.regime import classify_q, stable_land_mask
from eqm.scanner import render_graph_svg

sigma = 1 + 1j
pot = Potential.quartic(sigma)
rep = classify_q(pot, 1)
print("verdict", rep.verdict, "conditions", rep.conditions)

g = rep.graph
for k in ("cut", "ray", "hump", "connection", "gap-connection"):
    print(f"  {k:15s}{g.summary.get(k, 0)}")
print("  largest departure error from the asymptotic angles (deg):",
      round(g.summary["max_angle_dev_deg"], 4))

# every face should satisfy the vertex/order identity
for r in teichmuller_audit(g):
    print("  face", r["face"], r["vertices"], "lhs", r["lhs"], "rhs", round(r["rhs"], 4),
          "ok" if r["ok"] else "FAILED")

# the sign of Re eta on the plane, cut along the traced support
ep = rep.endpoints
ev = EtaEvaluator(pot, ep, compute_h(pot, ep), BranchedSqrtR(ep, g.cut_polylines()))
mask = stable_land_mask(ev, (-4, 4, -4, 4), 161)
out = sys.argv[1] if len(sys.argv) > 1 else "critical_graph.svg"
render_graph_svg(g, ep, out, mask, mask.window)
print("wrote", out)
