"""Cross-sections, the affine-invariant section area and the intersection body.

For a plane spanned by ``u, v`` in R^3 the area of ``K`` measured in units of
the parallelogram ``u ^ v`` is ``(1/2) int Psi(u cos t + v sin t)^-2 dt``; its
inverse ``A(u ^ v)`` is positively 1-homogeneous in the bivector.  The same
radial device with ``(1/3) int_{S^2} Psi^-3`` measures hyperplane sections of
bodies in R^4.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.spatial import cKDTree

from .algebra import hodge_normal
from .body import ConvexBody, midpoint_violation, symmetry_check
from .errors import (AsymmetricBody, DegenerateBivector, NotDifferentiable,
                     NullGradient, RankDeficient)
from .grids import circle_grid, fibonacci_sphere, sphere_quadrature, tangent_frame

__all__ = [
    "SectionBody", "hyperplane_graph", "cross_section", "radial_volume",
    "area_A", "area_A_many", "hyperplane_area", "choose_nu", "nu_kernel_residual",
    "IntersectionBodySample", "intersection_body_boundary", "coordinate_hyperplane",
]


class SectionBody(ConvexBody):
    """Intersection of a body with the column span of ``embedding``.

    The section is described in the coordinates of the embedding basis, so its
    norm is ``y -> Psi(E y)``.
    """

    def __init__(self, parent: ConvexBody, embedding):
        e = np.array(embedding, dtype=float)
        if e.ndim != 2 or e.shape[0] != parent.dim:
            raise ValueError("embedding must have shape (parent.dim, k)")
        s = np.linalg.svd(e, compute_uv=False)
        if s.size == 0 or s[-1] <= 1e-12 * max(1.0, s[0]):
            raise RankDeficient("section basis is not linearly independent")
        e.setflags(write=False)
        self.parent = parent
        self.embedding = e
        grad = None
        if parent.gradient is not None:
            def grad(y):
                return parent.gradient(y @ e.T) @ e
        super().__init__(e.shape[1], lambda y: parent.norm(y @ e.T), grad,
                         parent.symmetric, f"{parent.name}|section{e.shape[1]}")


def coordinate_hyperplane(dim: int = 4) -> np.ndarray:
    """Basis matrix (columns) of the span of the first ``dim - 1`` axes."""
    return np.eye(dim)[:, : dim - 1]


def hyperplane_graph(lam, nu, x_basis=None) -> np.ndarray:
    """Embedding ``x -> x + lam(x) nu`` of X into V, as a ``d x (d-1)`` matrix.

    ``lam`` is a covector on X expressed in the dual of ``x_basis`` (default:
    the first coordinate axes).
    """
    nu = np.asarray(nu, dtype=float)
    lam = np.asarray(lam, dtype=float)
    xb = coordinate_hyperplane(nu.size) if x_basis is None else np.asarray(x_basis, float)
    return xb + np.outer(nu, lam)


def cross_section(body: ConvexBody, basis) -> SectionBody:
    """Section of ``body`` by the span of the columns of ``basis``."""
    return SectionBody(body, basis)


def radial_volume(body: ConvexBody, frame, n_angles: int = 512, quad=(48, 96)) -> float:
    """Volume of ``{y : Psi(frame y) <= 1}`` for a 2- or 3-column frame."""
    frame = np.asarray(frame, dtype=float)
    k = frame.shape[1]
    if k == 2:
        w = circle_grid(n_angles)
        vals = body.norm(w @ frame.T) ** -2.0
        return float(np.pi * np.mean(vals))
    if k == 3:
        nodes, wts = sphere_quadrature(*quad)
        vals = body.norm(nodes @ frame.T) ** -3.0
        return float(np.dot(wts, vals) / 3.0)
    raise ValueError("frame must have 2 or 3 columns")


def area_A(body3: ConvexBody, sigma, grid_n: int = 512, u=None, v=None) -> float:
    """Inverse section area ``A(sigma)`` for a bivector of R^3.

    Parameters
    ----------
    body3 : ConvexBody
        Body in R^3.
    sigma : array_like, shape (3,)
        Bivector in the cofactor basis.
    grid_n : int
        Number of uniform angles in the radial quadrature.
    u, v : array_like, optional
        Representatives with ``u ^ v = sigma``.  When omitted an orthonormal
        pair is used and the homogeneity is applied exactly.

    Raises
    ------
    DegenerateBivector
        If ``sigma`` is zero.
    """
    sigma = np.asarray(sigma, dtype=float)
    s = float(np.linalg.norm(sigma))
    if s < 1e-14:
        raise DegenerateBivector("bivector is zero")
    if u is not None and v is not None:
        u = np.asarray(u, dtype=float)
        v = np.asarray(v, dtype=float)
        if np.linalg.norm(np.cross(u, v) - sigma) > 1e-12 * max(1.0, s):
            raise ValueError("u ^ v does not equal sigma")
        return 1.0 / radial_volume(body3, np.column_stack([u, v]), grid_n)
    uu, vv = tangent_frame(sigma)
    return s / radial_volume(body3, np.column_stack([uu, vv]), grid_n)


def area_A_many(body3: ConvexBody, sigmas, grid_n: int = 512, chunk: int = 512) -> np.ndarray:
    """Vectorized :func:`area_A` for a stack of bivectors, shape ``(m, 3)``."""
    sig = np.atleast_2d(np.asarray(sigmas, dtype=float))
    s = np.linalg.norm(sig, axis=1)
    if np.any(s < 1e-14):
        raise DegenerateBivector("zero bivector in batch")
    u, v = tangent_frame(sig)
    w = circle_grid(grid_n)
    out = np.empty(len(sig))
    for a in range(0, len(sig), chunk):
        b = min(len(sig), a + chunk)
        pts = (w[None, :, 0, None] * u[a:b, None, :] + w[None, :, 1, None] * v[a:b, None, :])
        vals = body3.norm(pts) ** -2.0
        out[a:b] = s[a:b] / (np.pi * vals.mean(axis=1))
    return out


# --------------------------------------------------------------------------
# hyperplane area in R^4 and the choice of nu

def _smooth_frame(n, x_basis):
    nh = n / np.linalg.norm(n)
    b = x_basis - np.outer(nh, nh @ x_basis)
    q, r = np.linalg.qr(b)
    return q * np.sign(np.diag(r))


def hyperplane_area(body4: ConvexBody, n, x_basis=None, quad=(48, 96)) -> float:
    """Inverse 3-volume ``A`` of the hyperplane section with Hodge vector ``n``.

    ``n`` represents the 3-vector ``sigma`` through ``n . w = det[sigma, w]``;
    the section is ``n``-perpendicular and ``A`` is 1-homogeneous in ``n``.
    The orthonormal frame varies smoothly with ``n`` near ``x_basis``.
    """
    n = np.asarray(n, dtype=float)
    xb = coordinate_hyperplane(n.size) if x_basis is None else np.asarray(x_basis, float)
    frame = _smooth_frame(n, xb)
    return float(np.linalg.norm(n)) / radial_volume(body4, frame, quad=quad)


def choose_nu(body4: ConvexBody, x_basis=None, h: float = 1e-3, quad=(48, 96),
              return_info: bool = False):
    """Transversal direction ``nu`` on which the area differential vanishes.

    The gradient ``g`` of ``A`` in Hodge coordinates is formed by central
    differences.  Since ``dA(nu ^ a ^ b) = det[nu, a, b, g]``, the kernel
    condition for every ``a ^ b`` in the bivectors of X holds exactly when
    ``nu`` is parallel to ``g``.

    Parameters
    ----------
    body4 : ConvexBody
        Body in R^4.
    x_basis : array_like, shape (4, 3), optional
        Basis of the hyperplane X (columns); coordinate hyperplane by default.
    h : float
        Finite-difference step.
    return_info : bool
        Also return a dictionary of diagnostics.

    Raises
    ------
    NotDifferentiable
        If second-order one-sided differences disagree by more than ``10 h^2``
        or the Euler relation ``dA(sigma) = A(sigma)`` is off by more than 5%.
    NullGradient
        If the gradient norm is below 1e-12.
    """
    xb = coordinate_hyperplane(4) if x_basis is None else np.asarray(x_basis, float)
    n0 = hodge_normal(xb)

    def A(n):
        return hyperplane_area(body4, n, xb, quad)

    a0 = A(n0)
    g = np.empty(4)
    gap = 0.0
    for i in range(4):
        e = np.zeros(4)
        e[i] = h
        ap, am = A(n0 + e), A(n0 - e)
        ap2, am2 = A(n0 + 2 * e), A(n0 - 2 * e)
        g[i] = (ap - am) / (2 * h)
        fwd = (-3 * a0 + 4 * ap - ap2) / (2 * h)
        bwd = (3 * a0 - 4 * am + am2) / (2 * h)
        gap = max(gap, abs(fwd - bwd))
    if gap > 10 * h * h:
        raise NotDifferentiable(f"one-sided differences disagree by {gap:.3e}")
    gn = float(np.linalg.norm(g))
    if gn < 1e-12:
        raise NullGradient("area differential vanishes")
    euler = float(g @ n0)
    if abs(euler - a0) > 0.05 * abs(a0):
        raise NotDifferentiable(f"Euler relation off: dA(sigma)={euler:.6g}, A={a0:.6g}")
    nu = g / gn
    if nu @ n0 < 0:
        nu = -nu
    if return_info:
        return nu, {"gradient": g, "A": a0, "euler": euler, "one_sided_gap": gap, "h": h}
    return nu


def nu_kernel_residual(body4: ConvexBody, nu, x_basis=None, h: float = 1e-3,
                       quad=(48, 96)) -> float:
    """Max ``|dA(nu ^ beta)|`` over ``beta`` in the coordinate bivectors of X.

    Each directional derivative is taken independently by central differences
    along the Hodge vector of ``nu ^ a ^ b``.
    """
    xb = coordinate_hyperplane(4) if x_basis is None else np.asarray(x_basis, float)
    n0 = hodge_normal(xb)
    nu = np.asarray(nu, dtype=float)
    worst = 0.0
    for i, j in ((0, 1), (1, 2), (0, 2)):
        d = hodge_normal(np.column_stack([nu, xb[:, i], xb[:, j]]))
        ap = hyperplane_area(body4, n0 + h * d, xb, quad)
        am = hyperplane_area(body4, n0 - h * d, xb, quad)
        worst = max(worst, abs(ap - am) / (2 * h))
    return worst


# --------------------------------------------------------------------------
# intersection body

@dataclass
class IntersectionBodySample:
    """Boundary of ``{A <= 1}`` sampled along unit bivector directions."""

    directions: np.ndarray
    radii: np.ndarray
    convexity_violation: float
    body: ConvexBody
    grid_n: int = 512

    def points(self) -> np.ndarray:
        return self.directions * self.radii[:, None]

    def radius(self, sigma_hat) -> np.ndarray:
        """Radius of the boundary along arbitrary directions."""
        s = np.atleast_2d(np.asarray(sigma_hat, dtype=float))
        s = s / np.linalg.norm(s, axis=1, keepdims=True)
        return 1.0 / area_A_many(self.body, s, self.grid_n)

    def project(self, sigma) -> np.ndarray:
        """Radially scale bivectors onto the boundary ``A = 1``."""
        s = np.atleast_2d(np.asarray(sigma, dtype=float))
        return s / area_A_many(self.body, s, self.grid_n)[:, None]

    def to_csv(self, path) -> None:
        data = np.column_stack([self.directions, self.radii])
        np.savetxt(path, data, delimiter=",", fmt="%.17g",
                   header="s1,s2,s3,r", comments="")


def intersection_body_boundary(body3: ConvexBody, grid=2048, grid_n: int = 512,
                               n_random_pairs: int = 2000, seed: int = 0) -> IntersectionBodySample:
    """Sample the boundary of the intersection body of an origin-symmetric body.

    Parameters
    ----------
    body3 : ConvexBody
        Symmetric body in R^3.
    grid : int or array_like
        Number of Fibonacci directions, or explicit unit bivectors.
    grid_n : int
        Angular nodes of each area quadrature.

    Returns
    -------
    IntersectionBodySample
        Radii ``1 / A`` and the largest midpoint-convexity violation of the
        sampled boundary (pairs of grid neighbours plus random pairs).

    Raises
    ------
    AsymmetricBody
    """
    if symmetry_check(body3) >= 1e-8:
        raise AsymmetricBody("intersection body needs an origin-symmetric body")
    dirs = fibonacci_sphere(grid) if np.isscalar(grid) else np.asarray(grid, dtype=float)
    dirs = dirs / np.linalg.norm(dirs, axis=1, keepdims=True)
    r = 1.0 / area_A_many(body3, dirs, grid_n)
    pts = dirs * r[:, None]
    tree = cKDTree(dirs)
    _, nb = tree.query(dirs, k=min(5, len(dirs)))
    i0 = np.repeat(np.arange(len(dirs)), nb.shape[1] - 1)
    i1 = nb[:, 1:].ravel()
    rng = np.random.default_rng(seed)
    j0 = rng.integers(0, len(dirs), n_random_pairs)
    j1 = rng.integers(0, len(dirs), n_random_pairs)
    a = np.concatenate([i0, j0])
    b = np.concatenate([i1, j1])
    mid = 0.5 * (pts[a] + pts[b])
    ok = np.linalg.norm(mid, axis=1) > 1e-9
    viol = area_A_many(body3, mid[ok], grid_n) - 1.0
    return IntersectionBodySample(dirs, r, float(max(0.0, viol.max())), body3, grid_n)


def section_convexity(section: SectionBody, n_pairs: int = 10_000, seed: int = 0) -> float:
    """Midpoint-convexity violation of a section (delegates to the body check)."""
    return midpoint_violation(section, n_pairs=n_pairs, seed=seed)
