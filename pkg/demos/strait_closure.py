"""
Closing of the strait along Im sigma = 4
========================================

Continue the one-cut solution from sigma = -0.5 + 4i to the left. The
stable-land corridor that carries the contour from b_1 to infinity narrows
and closes near Re sigma = -1.15; beyond it the point is three-cut.
"""

import numpy as np

from eqm.poly_core import Potential
from eqm.regime import RegimeOptions, classify_q

opts = RegimeOptions(with_mask=True)
prev = None
xs, widths = [], []
for x in np.arange(-0.5, -1.301, -0.05):
    pot = Potential.quartic(x + 4j)
    rep = classify_q(pot, 1, opts, extra_seeds=[prev] if prev is not None else None)
    w = rep.diagnostics.get("corridor_widths", {}).get("b_q_right")
    print(f"x={x:+.2f}  one-cut {rep.verdict:9s} hint={rep.boundary_type_hint:7s} width={w}")
    if rep.verdict != "regular":
        three = classify_q(pot, 3)
        print(f"          three-cut {three.verdict}")
        continue
    prev = rep.endpoints
    xs.append(x)
    widths.append(w)

# the last widths extrapolate linearly to the closing point
slope, icpt = np.polyfit(xs[-3:], widths[-3:], 1)
print("corridor closes near x =", round(-icpt / slope, 3))
