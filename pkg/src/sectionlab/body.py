"""Convex bodies given by Minkowski norms, one-sided derivatives and tangency.

A body is described by its gauge ``Psi`` (positively 1-homogeneous, positive
off the origin, subadditive).  Every norm callable accepts arrays of shape
``(..., d)`` and returns shape ``(...)``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .algebra import PolyVectorField
from .errors import NotConvex, ValidationError
from .grids import sphere_grid

__all__ = [
    "ConvexBody", "BodySpec", "make_body", "ellipsoid_body", "lp_body",
    "perturbed_body", "poly_norm_body", "body_from_norm", "dir_deriv",
    "forward_tangent", "tangent_space", "symmetry_check",
    "midpoint_violation", "homogeneity_error", "boundary_points",
]


class ConvexBody:
    """Unit ball ``{Psi <= 1}`` of a Minkowski norm on R^dim.

    Parameters
    ----------
    dim : int
    norm : callable
        Vectorized gauge, ``(..., dim) -> (...)``.
    gradient : callable, optional
        Vectorized gradient ``(..., dim) -> (..., dim)``; supply it only when
        the norm is differentiable away from the origin.
    symmetric : bool
        Whether ``Psi(-x) = Psi(x)``.
    name : str
    """

    def __init__(self, dim: int, norm: Callable, gradient: Optional[Callable] = None,
                 symmetric: bool = True, name: str = "body"):
        self.dim = int(dim)
        self._norm = norm
        self.gradient = gradient
        self.symmetric = bool(symmetric)
        self.name = name

    @property
    def smooth(self) -> bool:
        return self.gradient is not None

    def norm(self, x) -> np.ndarray:
        return self._norm(np.asarray(x, dtype=float))

    __call__ = norm

    def grad(self, x) -> np.ndarray:
        """Analytic gradient when available, central differences otherwise."""
        x = np.asarray(x, dtype=float)
        if self.gradient is not None:
            return self.gradient(x)
        return _fd_gradient(self._norm, x)

    def __repr__(self):
        return f"ConvexBody(dim={self.dim}, name={self.name!r})"


def _fd_gradient(norm, x, h=1e-7):
    x = np.asarray(x, dtype=float)
    scale = np.linalg.norm(x, axis=-1, keepdims=True)
    step = h * np.maximum(scale, 1e-300)
    g = np.empty_like(x)
    for k in range(x.shape[-1]):
        e = np.zeros(x.shape[-1])
        e[k] = 1.0
        g[..., k] = (norm(x + step * e) - norm(x - step * e)) / (2 * step[..., 0])
    return g


# --------------------------------------------------------------------------
# catalog

def ellipsoid_body(q, name: str = "ellipsoid") -> ConvexBody:
    """Body ``{x : x^T Q x <= 1}`` for a positive definite ``Q``."""
    q = np.array(q, dtype=float)
    q = 0.5 * (q + q.T)
    if np.linalg.eigvalsh(q).min() <= 0:
        raise ValidationError("Q", "must be positive definite")

    def norm(x):
        return np.sqrt(np.maximum(np.einsum("...i,ij,...j->...", x, q, x), 0.0))

    def grad(x):
        return (x @ q) / norm(x)[..., None]

    return ConvexBody(q.shape[0], norm, grad, True, name)


def lp_body(p: float, scales, name: Optional[str] = None) -> ConvexBody:
    """Scaled l_p ball ``{sum |x_i / s_i|^p <= 1}``, ``1 <= p <= inf``.

    The gradient is attached for ``1 < p < inf``.
    """
    s = np.asarray(scales, dtype=float)
    p = float(p)
    if p < 1:
        raise ValidationError("p", "must be at least 1")
    if np.any(s <= 0):
        raise ValidationError("scales", "must be positive")
    name = name or f"l{p:g}"

    if np.isinf(p):
        return ConvexBody(s.size, lambda x: np.max(np.abs(x / s), axis=-1), None, True, name)
    if p == 1.0:
        return ConvexBody(s.size, lambda x: np.sum(np.abs(x / s), axis=-1), None, True, name)

    def norm(x):
        y = np.abs(x / s)
        m = np.max(y, axis=-1, keepdims=True)
        m = np.where(m > 0, m, 1.0)
        return m[..., 0] * np.sum((y / m) ** p, axis=-1) ** (1.0 / p)

    def grad(x):
        y = x / s
        n = norm(x)[..., None]
        return np.sign(y) * (np.abs(y) / n) ** (p - 1) / s

    return ConvexBody(s.size, norm, grad, True, name)


def perturbed_body(base: ConvexBody, eps: float, direction, name: str = "perturbed") -> ConvexBody:
    """Quartic angular perturbation ``Psi(x) = Psi_0(x) (1 + eps (d.x/|x|)^4)``.

    Convex for small ``eps``; for the Euclidean disk the curvature condition
    fails once ``eps > 1/3``.
    """
    d = np.asarray(direction, dtype=float)
    d = d / np.linalg.norm(d)

    def norm(x):
        r = np.linalg.norm(x, axis=-1)
        s = (x @ d) / np.where(r > 0, r, 1.0)
        return base.norm(x) * (1.0 + eps * s ** 4)

    grad = None
    if base.gradient is not None:
        def grad(x):
            r = np.linalg.norm(x, axis=-1)[..., None]
            dx = (x @ d)[..., None]
            s = dx / r
            gs = d / r - dx * x / r ** 3
            return (base.gradient(x) * (1.0 + eps * s ** 4)
                    + base.norm(x)[..., None] * 4.0 * eps * s ** 3 * gs)

    return ConvexBody(base.dim, norm, grad, base.symmetric, name)


def poly_norm_body(poly: PolyVectorField, name: str = "poly_norm") -> ConvexBody:
    """Gauge ``P(x)^(1/m)`` of an even homogeneous polynomial ``P`` of degree m."""
    m = poly.degree
    if m % 2 or m == 0:
        raise ValidationError("degree", "must be even and positive")
    probe = sphere_grid(poly.nvars, 4096, seed=7)
    if np.min(poly(probe)[:, 0]) <= 0:
        raise ValidationError("terms", "polynomial must be positive off the origin")
    grads = [poly.derivative(k) for k in range(poly.nvars)]

    def norm(x):
        return np.maximum(poly(x)[..., 0], 0.0) ** (1.0 / m)

    def grad(x):
        val = poly(x)[..., 0]
        g = np.stack([gk(x)[..., 0] for gk in grads], axis=-1)
        return g * (val ** (1.0 / m - 1.0) / m)[..., None]

    return ConvexBody(poly.nvars, norm, grad, True, name)


def body_from_norm(norm: Callable, dim: int, gradient: Optional[Callable] = None,
                   symmetric: Optional[bool] = None, name: str = "custom") -> ConvexBody:
    """Wrap an arbitrary vectorized gauge; symmetry is detected when not given."""
    body = ConvexBody(dim, norm, gradient, True, name)
    if symmetric is None:
        symmetric = symmetry_check(body) < 1e-12
    body.symmetric = bool(symmetric)
    return body


@dataclass(frozen=True)
class BodySpec:
    """Declarative description of a catalog body.

    ``kind`` is one of ``"ellipsoid"``, ``"lp"``, ``"perturbed"``,
    ``"poly_norm"``.  Only the fields relevant to the kind are read.
    ``terms`` lists ``(coefficient, exponent tuple)`` pairs.
    """

    kind: str
    Q: Optional[tuple] = None
    p: Optional[float] = None
    scales: Optional[tuple] = None
    base: Optional["BodySpec"] = None
    eps: Optional[float] = None
    direction: Optional[tuple] = None
    terms: Optional[tuple] = None
    degree: Optional[int] = None
    dim: Optional[int] = None
    extra: dict = field(default_factory=dict, compare=False)

    def validate(self) -> None:
        if self.kind == "ellipsoid":
            if self.Q is None:
                raise ValidationError("Q", "required")
            q = np.asarray(self.Q, dtype=float)
            if q.ndim != 2 or q.shape[0] != q.shape[1] or not np.allclose(q, q.T):
                raise ValidationError("Q", "must be a symmetric square matrix")
            if np.linalg.eigvalsh(q).min() <= 0:
                raise ValidationError("Q", "must be positive definite")
        elif self.kind == "lp":
            if self.p is None or not np.isfinite(self.p) or self.p < 2:
                raise ValidationError("p", "must be a finite number >= 2")
            if self.scales is None or min(self.scales) <= 0:
                raise ValidationError("scales", "must be positive")
        elif self.kind == "perturbed":
            if self.base is None:
                raise ValidationError("base", "required")
            self.base.validate()
            if self.eps is None or self.eps < 0:
                raise ValidationError("eps", "must be non-negative")
            if self.direction is None:
                raise ValidationError("direction", "required")
        elif self.kind == "poly_norm":
            if self.degree is None or self.degree % 2 or self.degree <= 0:
                raise ValidationError("degree", "must be even and positive")
            if not self.terms:
                raise ValidationError("terms", "required")
            if self.dim is None:
                raise ValidationError("dim", "required")
            for c, e in self.terms:
                if len(e) != self.dim or sum(e) != self.degree:
                    raise ValidationError("terms", f"bad exponent {tuple(e)}")
        else:
            raise ValidationError("kind", f"unknown kind {self.kind!r}")


def _poly_from_terms(dim, degree, terms) -> PolyVectorField:
    from .algebra import monomials
    idx = {e: i for i, e in enumerate(monomials(dim, degree))}
    c = np.zeros(len(idx))
    for coef, e in terms:
        c[idx[tuple(int(k) for k in e)]] += float(coef)
    return PolyVectorField(dim, degree, c)


def _build(spec: BodySpec) -> ConvexBody:
    if spec.kind == "ellipsoid":
        return ellipsoid_body(spec.Q)
    if spec.kind == "lp":
        return lp_body(spec.p, spec.scales)
    if spec.kind == "perturbed":
        return perturbed_body(_build(spec.base), spec.eps, spec.direction)
    return poly_norm_body(_poly_from_terms(spec.dim, spec.degree, spec.terms))


def make_body(spec: BodySpec, n_pairs: int = 10_000, seed: int = 0,
              tol: float = 1e-10) -> ConvexBody:
    """Build a catalog body and check convexity on sampled midpoints.

    Raises
    ------
    ValidationError
        If the body description violates its invariants.
    NotConvex
        If some sampled midpoint violates convexity by more than ``tol``.
    """
    spec.validate()
    body = _build(spec)
    viol = midpoint_violation(body, n_pairs=n_pairs, seed=seed)
    if viol > tol:
        raise NotConvex(f"midpoint convexity violated by {viol:.3e}")
    return body


# --------------------------------------------------------------------------
# sampled invariants

def boundary_points(body: ConvexBody, directions) -> np.ndarray:
    """Radially project directions onto the boundary: ``x / Psi(x)``."""
    d = np.asarray(directions, dtype=float)
    return d / body.norm(d)[..., None]


def midpoint_violation(body: ConvexBody, n_pairs: int = 10_000, seed: int = 0) -> float:
    """Largest ``Psi((x+y)/2) - (Psi(x)+Psi(y))/2`` over sampled boundary pairs.

    Half of the pairs are independent; the other half are local pairs at
    log-uniform separations in ``[1e-3, 1]`` so that thin dents are caught.
    """
    rng = np.random.default_rng(seed)
    d = body.dim
    half = n_pairs // 2
    x = boundary_points(body, rng.standard_normal((n_pairs, d)))
    y_far = boundary_points(body, rng.standard_normal((half, d)))
    step = 10.0 ** rng.uniform(-3, 0, size=(n_pairs - half, 1))
    w = rng.standard_normal((n_pairs - half, d))
    y_near = boundary_points(body, x[half:] + step * w)
    y = np.vstack([y_far, y_near])
    lhs = body.norm(0.5 * (x + y))
    rhs = 0.5 * (body.norm(x) + body.norm(y))
    return float(np.max(lhs - rhs))


def homogeneity_error(body: ConvexBody, n: int = 1000, seed: int = 0) -> float:
    """Max relative error of ``Psi(t x) = t Psi(x)`` for t in (0, 10)."""
    rng = np.random.default_rng(seed)
    x = rng.standard_normal((n, body.dim))
    t = rng.uniform(0.0, 10.0, size=n) + 1e-3
    a = body.norm(t[:, None] * x)
    b = t * body.norm(x)
    return float(np.max(np.abs(a - b) / b))


def symmetry_check(body: ConvexBody, grid=None) -> float:
    """Max of ``|Psi(x) - Psi(-x)|`` over unit grid directions."""
    if grid is None:
        grid = sphere_grid(body.dim, 2048)
        grid = np.vstack([np.eye(body.dim), grid])
    grid = np.asarray(grid, dtype=float)
    return float(np.max(np.abs(body.norm(grid) - body.norm(-grid))))


# --------------------------------------------------------------------------
# derivatives and tangency

_STEPS = (1e-3, 5e-4, 2.5e-4)


def dir_deriv(body: ConvexBody, x, v) -> np.ndarray:
    """One-sided directional derivative of the gauge at ``x`` along ``v``.

    Uses the analytic gradient when the body carries one.  Otherwise the
    forward quotients at three halving steps are combined by two rounds of
    Richardson extrapolation.  Broadcasts over leading axes.
    """
    x = np.asarray(x, dtype=float)
    v = np.asarray(v, dtype=float)
    if body.gradient is not None:
        return np.sum(body.gradient(x) * v, axis=-1)
    p0 = body.norm(x)
    q = [(body.norm(x + s * v) - p0) / s for s in _STEPS]
    r1 = 2.0 * q[1] - q[0]
    r2 = 2.0 * q[2] - q[1]
    return (4.0 * r2 - r1) / 3.0


def forward_tangent(body: ConvexBody, x, v, tol: float = 1e-6) -> bool:
    """True iff ``v`` is a forward tangent direction at the boundary point ``x``."""
    x = np.asarray(x, dtype=float)
    v = np.asarray(v, dtype=float)
    if abs(float(body.norm(x)) - 1.0) >= 1e-8:
        raise ValueError("x must lie on the boundary (project with x / Psi(x))")
    nv = float(np.linalg.norm(v))
    if nv == 0.0:
        return True
    return bool(abs(float(dir_deriv(body, x, v))) <= tol * (1.0 + nv))


def tangent_space(body: ConvexBody, x, tol: float = 1e-6, n_probe: int = 64,
                  seed: int = 0) -> np.ndarray:
    """Orthonormal basis (rows) of the two-sided tangent space at ``x``.

    The subgradients of the gauge near ``x`` are sampled; their span ``G``
    is the annihilator of the tangent space, so the candidate space is the
    orthogonal complement of ``G``.  Each candidate basis vector is then
    confirmed in both directions with :func:`forward_tangent`.
    """
    x = np.asarray(x, dtype=float)
    d = body.dim
    if body.gradient is not None:
        grads = body.gradient(x)[None, :]
    else:
        rng = np.random.default_rng(seed)
        w = rng.standard_normal((n_probe, d))
        w /= np.linalg.norm(w, axis=1, keepdims=True)
        pts = x + 1e-6 * w
        grads = _fd_gradient(body._norm, pts, h=1e-9 / max(1e-300, np.linalg.norm(x)))
    _, s, vt = np.linalg.svd(grads)
    rank = int(np.sum(s > 1e-3 * s[0])) if s.size and s[0] > 0 else 0
    cand = vt[rank:]
    keep = [v for v in cand
            if forward_tangent(body, x, v, tol) and forward_tangent(body, x, -v, tol)]
    return np.array(keep).reshape(len(keep), d)
