"""
Endpoints of the equilibrium support
====================================

Solve the endpoint equations for the Gaussian field and a few quartic
fields, and compare with the closed forms that exist in the symmetric cases.
"""

import numpy as np

from eqm.endpoint_system import moments, solve_endpoints
from eqm.measure import EquilibriumMeasure, compute_h, density_at, lagrange_multiplier
from eqm.poly_core import Potential
from eqm.regime import symmetric_seeds

# V = z**2 / 2: the support is [-2, 2] and the density is the semicircle
pot = Potential(1, (0,))
sol = solve_endpoints(pot, 1, symmetric_seeds(pot, 1)[0])
ep = sol.endpoints
h = compute_h(pot, ep)
print("semicircle endpoints", ep.a[0], ep.b[0], "after", sol.iterations, "Newton steps")
print("  Lagrange constant", lagrange_multiplier(pot, ep, h))
print("  density at 0     ", density_at(EquilibriumMeasure(pot, ep, h), 0, 0.0), "vs", 1 / np.pi)

# quartic V = z**4/4 + sigma z**2/2 with one cut [-b, b]: 3 b**4 + 4 sigma b**2 = 16
for sigma in (0, 1, 2j, 1 + 1j):
    pot = Potential.quartic(sigma)
    sol = solve_endpoints(pot, 1, symmetric_seeds(pot, 1)[0])
    b = sol.endpoints.b[0]
    print(f"sigma={sigma!s:8}  b={b:.12f}  3b^4+4sb^2-16={abs(3*b**4 + 4*sigma*b**2 - 16):.1e}")

# the normalised moments vanish below q and equal -1 at q
pot = Potential.quartic(1 + 1j)
ep = solve_endpoints(pot, 1, symmetric_seeds(pot, 1)[0]).endpoints
print("moments at 1+i:", np.round(moments(pot, ep), 14))

# two cuts at sigma = -3: a**2 = -sigma - 2, b**2 = -sigma + 2
pot = Potential.quartic(-3)
ep = solve_endpoints(pot, 2, symmetric_seeds(pot, 2)[0]).endpoints
print("two-cut endpoints at -3:", np.sort_complex(ep.points).real)
