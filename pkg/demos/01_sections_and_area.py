"""
Cross-sections, section areas and the intersection body
=======================================================

Bodies are described by their Minkowski norm.  Planes through the origin in
R^3 are bivectors, written in the basis (e2^e3, e3^e1, e1^e2).
"""

import numpy as np

from sectionlab.body import ellipsoid_body, lp_body
from sectionlab.sections import area_A, intersection_body_boundary

# an ellipsoid with semi-axes 1, 2, 3
ell = ellipsoid_body(np.diag([1.0, 1 / 4.0, 1 / 9.0]))
e12 = np.array([0.0, 0.0, 1.0])

# A is the reciprocal area, so the e1^e2 section (an ellipse 1 x 2) gives 1/(2 pi)
print("A(e1^e2) =", area_A(ell, e12), " expected", 1 / (2 * np.pi))

# A is a norm on bivectors: homogeneous of degree 1 and even
print("A(3 s) / 3 =", area_A(ell, 3 * e12) / 3)
print("A(-s)     =", area_A(ell, -e12))

# sample the boundary of the intersection body {A = 1} of the l4 ball
ib = intersection_body_boundary(lp_body(4, (1.0, 1.0, 1.0)), grid=200)
print("l4 intersection body: radius range %.4f .. %.4f, convexity violation %.1e"
      % (ib.radii.min(), ib.radii.max(), ib.convexity_violation))
