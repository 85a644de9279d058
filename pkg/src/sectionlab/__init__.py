"""Numerical laboratory for convex bodies in R^4 with linearly equivalent hyperplane sections.

Modules
-------
algebra      dense homogeneous polynomial fields, wedge products and Hodge duals
body         convex bodies as Minkowski norms; tangency predicates
sections     cross-sections, section areas, intersection bodies
equivalence  Loewner normalization, linear equivalence search, invariant inner products
tensor       the trace-free tensor R (smooth and orbit routes) and its checks
fields       quadratic fields V_i, degeneracy, rank-one factorization
flow         frame and plane flows, fixed points, orbits, indices
certify      ellipse sections, degenerate cases, projectors, the 4D certificate
cli          command-line frontend
"""

from .body import BodySpec, ConvexBody, ellipsoid_body, lp_body, make_body, poly_norm_body
from .certify import CertifyConfig, Certificate, certify_ellipsoid_4d
from .errors import SectionLabError
from .sections import SectionBody, area_A, cross_section
from .tensor import TensorR

__version__ = "0.1.0"

__all__ = [
    "BodySpec", "ConvexBody", "ellipsoid_body", "lp_body", "make_body", "poly_norm_body",
    "CertifyConfig", "Certificate", "certify_ellipsoid_4d", "SectionLabError",
    "SectionBody", "area_A", "cross_section", "TensorR", "__version__",
]
