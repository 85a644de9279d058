"""
Plane flows and their zeros
===========================

A tensor R (one trace-free operator per covector) induces a quadratic field on
bivectors.  Its zeros are planes whose sections stay put under the flow.
"""

import numpy as np

from sectionlab.body import ellipsoid_body
from sectionlab.certify import fit_ellipse
from sectionlab.flow import fixed_points, frame_flow, index_at, plane_flow_field
from sectionlab.grids import tangent_frame
from sectionlab.sections import SectionBody
from sectionlab.tensor import rotation_tensor, skew_tensor

q = np.diag([1.0, 2.0, 3.0])
body = ellipsoid_body(q)
r = skew_tensor(a=np.diag([1.0, 2.0, 0.5]), q=q)

# the frame flow moves (u, v) without changing the section it spans, up to
# linear equivalence: Psi along the frame and the section area are conserved
res = frame_flow(r, [1.0, 0.2, 0.0], [0.1, 1.0, 0.5], T=10.0, dt=1e-3, body=body)
print("Psi drift %.1e, area drift %.1e" % (res.psi_drift, res.area_drift))

W = plane_flow_field(r)
fp = fixed_points(W, S=body)
print("%d isolated zeros" % len(fp))
for s in fp.directions:
    u, v = tangent_frame(s)
    _, resid = fit_ellipse(SectionBody(body, np.column_stack([u, v])))
    print("  sigma = %s  index %+d  ellipse fit %.1e"
          % (np.round(s, 4), index_at(W, s), resid))

# the rotation tensor lam3 J has a whole circle of zeros; the indices there
# are undefined and only the poles are isolated
W = plane_flow_field(rotation_tensor({2: 2}))
print("rotation: pole index", index_at(W, np.array([0.0, 0.0, 1.0])))
