"""
End-to-end certification in R^4
===============================

The certifier runs a sequence of gated stages and stops at the first failure.
The l4 ball passes the small-tilt construction of R but fails the finite tilt
probe.  Pass ``--full`` to also certify ellipsoid4 (about 20 s).
"""

import sys

import numpy as np

from sectionlab.body import ellipsoid_body, lp_body
from sectionlab.certify import certify_ellipsoid_4d


def show(name, body):
    cert = certify_ellipsoid_4d(body)
    print(name, "->", cert.status)
    for s in cert.stages:
        print("   %-22s residual %.2e  gate %.0e  %s"
              % (s.name, s.residual, s.gate, "ok" if s.passed else "FAIL"))
    if cert.recovered_Q is not None:
        print("   recovered Q diagonal", np.round(np.diag(cert.recovered_Q), 8))


show("l4ball4", lp_body(4, (1.0, 1.0, 1.0, 1.0)))
if "--full" in sys.argv:
    show("ellipsoid4", ellipsoid_body(np.diag([1.0, 2.0, 3.0, 4.0])))
