"""The trace-free tensor R attached to a hyperplane X and a transversal nu.

For a covector ``lam`` on X, the hyperplane ``H_lam = {x + lam(x) nu}`` is the
graph of ``lam``.  When every hyperplane section is linearly equivalent to
``K = B cap X``, the equivalences ``K -> B cap H_lam`` vary to first order by
``x -> R_lam(x) + lam(x) nu``.  Two constructions are provided:

* the smooth route differentiates the nearest-to-identity equivalences
  ``G_lam`` by central differences in ``lam``;
* the orbit route normalizes ``F - i_0`` in an invariant metric on
  ``Hom(X, V)`` and extrapolates ``t -> 0``.

Both end with :func:`trace_adjust`, which moves trace into ``nu``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
from scipy.linalg import sqrtm

from .algebra import skew
from .body import ConvexBody, boundary_points, dir_deriv
from .equivalence import (SymmetryAlgebra, default_grid, find_equivalence,
                          invariant_inner_product, self_equivalence_algebra)
from .errors import CDegenerate, EquivalenceFailed
from .sections import SectionBody, coordinate_hyperplane, hyperplane_graph, radial_volume

__all__ = [
    "TensorR", "HomMetric", "RVerificationReport", "zero_tensor",
    "cross_product_tensor", "rotation_tensor", "skew_tensor", "random_tensor",
    "trace_adjust", "build_r_smooth", "build_r_orbit", "verify_r",
    "section_area_derivative", "tilt_probe", "TiltProbe", "J",
]

#: rotation generators ``J[i] = [e_i]_x``
J = np.array([skew(e) for e in np.eye(3)])


@dataclass
class TensorR:
    """Linear map ``lam -> R_lam`` from covectors on X to operators on X.

    ``coeffs[i]`` is the matrix ``R_{f_i}``; ``R_lam = sum_i lam_i R_{f_i}``.
    ``nu`` optionally records the (trace-adjusted) transversal the tensor was
    built with, and ``info`` holds construction diagnostics.
    """

    coeffs: np.ndarray
    nu: Optional[np.ndarray] = None
    info: dict = field(default_factory=dict, repr=False)

    def __post_init__(self):
        self.coeffs = np.array(self.coeffs, dtype=float)
        if self.coeffs.shape != (3, 3, 3):
            raise ValueError("coeffs must have shape (3, 3, 3)")

    def __call__(self, lam) -> np.ndarray:
        """Matrix ``R_lam``; a stack of covectors gives a stack of matrices."""
        return np.tensordot(np.asarray(lam, dtype=float), self.coeffs, axes=(-1, 0))

    def apply(self, lam, x) -> np.ndarray:
        """``R_lam(x)``, broadcasting over leading axes of ``lam`` and ``x``."""
        return np.einsum("...i,ijk,...k->...j", np.asarray(lam, float), self.coeffs,
                         np.asarray(x, float))

    def traces(self) -> np.ndarray:
        return np.trace(self.coeffs, axis1=1, axis2=2)

    @property
    def norm(self) -> float:
        """Frobenius norm of the coefficient array."""
        return float(np.linalg.norm(self.coeffs))

    def __add__(self, other):
        return TensorR(self.coeffs + other.coeffs)

    def __sub__(self, other):
        return TensorR(self.coeffs - other.coeffs)

    def __mul__(self, s):
        return TensorR(float(s) * self.coeffs)

    __rmul__ = __mul__


def zero_tensor() -> TensorR:
    return TensorR(np.zeros((3, 3, 3)))


def cross_product_tensor() -> TensorR:
    """``R_lam(x) = l x x`` with ``l`` the Euclidean dual of ``lam``."""
    return TensorR(J.copy())


def rotation_tensor(assign: dict) -> TensorR:
    """Tensor with ``R_{f_i} = J[k]`` for each ``i: k`` in ``assign``.

    ``rotation_tensor({2: 2})`` is ``lam_3 J`` and
    ``rotation_tensor({0: 0, 1: 1})`` is ``lam_1 J_1 + lam_2 J_2``
    (indices are zero-based).
    """
    c = np.zeros((3, 3, 3))
    for i, k in assign.items():
        c[i] = J[k]
    return TensorR(c)


def skew_tensor(a=None, q=None) -> TensorR:
    """``R_lam = Q^{-1} [A lam]_x``, tangent to the ellipsoid ``x^T Q x = 1``.

    With ``A`` symmetric positive definite the tensor is nondegenerate; its
    plane flow has isolated zeros.
    """
    a = np.eye(3) if a is None else np.asarray(a, float)
    qi = np.eye(3) if q is None else np.linalg.inv(np.asarray(q, float))
    return TensorR(np.array([qi @ skew(a[:, i]) for i in range(3)]))


def random_tensor(rng, trace_free: bool = True, scale: float = 1.0) -> TensorR:
    c = scale * rng.standard_normal((3, 3, 3))
    if trace_free:
        c -= np.trace(c, axis1=1, axis2=2)[:, None, None] * np.eye(3) / 3.0
    return TensorR(c)


# --------------------------------------------------------------------------
# metric on Hom(X, V)

class HomMetric:
    """Inner product ``<F, G> = tr(F G^*)`` on ``Hom(X, V)``.

    X carries the inner product ``P`` and V = X + R nu the block extension
    with ``nu`` a unit vector orthogonal to X.  Maps are 4 x 3 arrays in the
    coordinates ``(X basis, nu)``; a 3 x 3 array is an X-valued map.
    """

    def __init__(self, p):
        p = np.asarray(p, dtype=float)
        self.p = 0.5 * (p + p.T)
        self.s = np.real(sqrtm(self.p))
        self.s = 0.5 * (self.s + self.s.T)
        self.sinv = np.linalg.inv(self.s)

    def _coords(self, f) -> np.ndarray:
        f = np.asarray(f, dtype=float)
        out = [(self.s @ f[:3] @ self.sinv).ravel()]
        if f.shape[0] == 4:
            out.append(f[3] @ self.sinv)
        return np.concatenate(out)

    def inner(self, f, g) -> float:
        return float(self._coords(f) @ self._coords(g))

    def norm(self, f) -> float:
        return float(np.linalg.norm(self._coords(f)))

    def distance_vector(self, lam):
        """Callable ``G -> coordinates of F - i_0`` for the graph of ``lam``."""
        lam = np.asarray(lam, dtype=float)
        eye = np.eye(3)

        def vec(g):
            return self._coords(np.vstack([g - eye, lam @ g]))
        return vec


def _orthonormal_algebra(algebra: SymmetryAlgebra, metric: HomMetric) -> np.ndarray:
    if algebra.dim == 0:
        return np.zeros((0, 3, 3))
    coords = np.array([metric._coords(a) for a in algebra.basis])
    q, _ = np.linalg.qr(coords.T)
    return q.T


# --------------------------------------------------------------------------

def trace_adjust(R: TensorR, nu) -> tuple[TensorR, np.ndarray]:
    """Remove traces by shifting the transversal.

    With ``w`` the vector of X whose coordinates are ``tr R_{f_i}``, returns
    ``R'_lam = R_lam - w lam^T`` (trace free) and ``nu' = nu + X w`` so that
    ``R'_lam x + lam(x) nu'`` equals ``R_lam x + lam(x) nu`` (X embedded in V).

    ``nu`` may be given in V (length 4, the X basis taken as the first axes)
    or, when only the X part matters, as ``None``.
    """
    w = R.traces()
    c = R.coeffs - np.einsum("j,ik->ijk", w, np.eye(3))
    if nu is None:
        return TensorR(c), None
    nu = np.asarray(nu, dtype=float)
    xb = R.info.get("x_basis", coordinate_hyperplane(nu.size))
    return TensorR(c, info=dict(R.info)), nu + np.asarray(xb) @ w


def _setup(body4, x_basis, nu):
    xb = coordinate_hyperplane(4) if x_basis is None else np.asarray(x_basis, float)
    return xb, np.asarray(nu, dtype=float), SectionBody(body4, xb)


def _context(K, p, algebra, tol):
    if algebra is None:
        algebra = self_equivalence_algebra(K)
    if p is None:
        p = invariant_inner_product(K, algebra=algebra)
    return algebra, HomMetric(p)


def _match(K, body4, xb, nu, lam, tol, metric, algebra, seed):
    k_lam = SectionBody(body4, hyperplane_graph(lam, nu, xb))
    res = find_equivalence(K, k_lam, tol=tol, distance=metric.distance_vector(lam),
                           algebra=algebra, seed=seed)
    if res.residual > tol:
        raise EquivalenceFailed(np.asarray(lam), res.residual, tol)
    return res


def build_r_smooth(body4: ConvexBody, x_basis, nu, h: float = 1e-3, tol: float = 1e-4,
                   p=None, algebra=None, seed: int = 0) -> TensorR:
    """Tensor R by central differences of the equivalences ``G_{+-h f_i}``.

    Parameters
    ----------
    body4 : ConvexBody
        Smooth body in R^4.
    x_basis : array_like (4, 3) or None
        Basis of X; coordinate hyperplane if None.
    nu : array_like (4,)
        Transversal, typically from :func:`~sectionlab.sections.choose_nu`.
    h : float
        Tilt step.
    tol : float
        Equivalence gate.
    p : array_like, optional
        Invariant inner product on X; computed if omitted.
    algebra : SymmetryAlgebra, optional

    Returns
    -------
    TensorR
        Trace-free tensor; ``.nu`` holds the adjusted transversal and
        ``.info["equivalence_residual"]`` the worst match residual.

    Raises
    ------
    EquivalenceFailed
        If some tilted section is not matched within ``tol``.
    """
    xb, nu, K = _setup(body4, x_basis, nu)
    algebra, metric = _context(K, p, algebra, tol)
    coeffs = np.zeros((3, 3, 3))
    worst = 0.0
    for i in range(3):
        g = []
        for s in (1.0, -1.0):
            lam = s * h * np.eye(3)[i]
            res = _match(K, body4, xb, nu, lam, tol, metric, algebra, seed)
            worst = max(worst, res.residual)
            g.append(res.map)
        coeffs[i] = (g[0] - g[1]) / (2 * h)
    raw = TensorR(coeffs, info={"x_basis": xb})
    out, nu2 = trace_adjust(raw, nu)
    out.nu = nu2
    out.info.update(equivalence_residual=worst, raw_traces=raw.traces(), h=h,
                    route="smooth")
    return out


def build_r_orbit(body4: ConvexBody, x_basis, nu, t_seq: Sequence[float] = (1e-2, 5e-3, 2.5e-3),
                  tol: float = 1e-4, p=None, algebra=None, seed: int = 0,
                  grid=None) -> TensorR:
    """Tensor R from normalized nearest-point differences ``(F_t - i_0)/|F_t - i_0|``.

    For each basis covector ``f_i`` and each ``t`` the equivalence
    ``F_t: K -> B cap H_{t f_i}`` nearest to the inclusion ``i_0`` (in the
    invariant metric on ``Hom(X, V)``) is found.  The normalized differences
    are extrapolated linearly to ``t = 0`` from the two smallest steps.  The
    nu-row of the limit is fit against ``f_i(x)`` on boundary samples, giving
    a scale ``C_i``, and ``R_{f_i} = C_i^{-1}`` times the X-block.

    Raises
    ------
    EquivalenceFailed
    CDegenerate
        If a fitted ``C_i`` is below 1e-8.
    """
    t_seq = sorted((float(t) for t in t_seq), reverse=True)
    if len(t_seq) < 2 or t_seq[-1] <= 0:
        raise ValueError("t_seq needs at least two positive steps")
    xb, nu, K = _setup(body4, x_basis, nu)
    algebra, metric = _context(K, p, algebra, tol)
    y = boundary_points(K, default_grid(3) if grid is None else grid)
    coeffs = np.zeros((3, 3, 3))
    cs = np.zeros(3)
    worst = 0.0
    spread = 0.0
    for i in range(3):
        f = np.eye(3)[i]
        ws = []
        for t in t_seq:
            res = _match(K, body4, xb, nu, t * f, tol, metric, algebra, seed)
            worst = max(worst, res.residual)
            d = np.vstack([res.map - np.eye(3), t * f @ res.map])
            ws.append(d / metric.norm(d))
        t1, t2 = t_seq[-1], t_seq[-2]
        w = (t2 * ws[-1] - t1 * ws[-2]) / (t2 - t1)
        if len(ws) >= 3:
            t3 = t_seq[-3]
            w_alt = (t3 * ws[-2] - t2 * ws[-3]) / (t3 - t2)
            spread = max(spread, metric.norm(w - w_alt))
        lam_x = y @ f
        c = float((y @ w[3]) @ lam_x / (lam_x @ lam_x))
        if abs(c) < 1e-8:
            raise CDegenerate(f"fitted C = {c:.3e} for basis covector {i}")
        cs[i] = c
        coeffs[i] = w[:3] / c
    raw = TensorR(coeffs, info={"x_basis": xb})
    out, nu2 = trace_adjust(raw, nu)
    out.nu = nu2
    out.info.update(equivalence_residual=worst, C=cs, raw_traces=raw.traces(),
                    extrapolation_spread=spread, t_seq=tuple(t_seq), route="orbit")
    return out


# --------------------------------------------------------------------------
# verification

@dataclass
class RVerificationReport:
    """Residuals of the defining conditions of R.

    ``tangency_residual`` is the worst ``|d+Psi_B(+-(R_lam x + lam(x) nu))|``
    over basis covectors and boundary samples of K; ``orthogonality_residual``
    the largest component of any ``R_{f_i}`` along the self-equivalence
    algebra of K in the invariant metric.
    """

    trace_residual: float
    tangency_residual: float
    orthogonality_residual: float

    def as_dict(self) -> dict:
        return {"trace_residual": self.trace_residual,
                "tangency_residual": self.tangency_residual,
                "orthogonality_residual": self.orthogonality_residual}


def verify_r(body4: ConvexBody, x_basis, nu, R: TensorR, grid=None, p=None,
             algebra=None) -> RVerificationReport:
    """Check trace, tangency and orthogonality of a candidate tensor."""
    xb, nu, K = _setup(body4, x_basis, nu)
    y = boundary_points(K, default_grid(3) if grid is None else grid)
    x = y @ xb.T
    tang = 0.0
    for i in range(3):
        v = (y @ R.coeffs[i].T) @ xb.T + np.outer(y[:, i], nu)
        dp = dir_deriv(body4, x, v)
        tang = max(tang, float(np.max(np.abs(dp))))
        if body4.gradient is None:
            tang = max(tang, float(np.max(np.abs(dir_deriv(body4, x, -v)))))
    algebra, metric = _context(K, p, algebra, 1e-6)
    basis = _orthonormal_algebra(algebra, metric)
    orth = 0.0
    for i in range(3):
        c = metric._coords(R.coeffs[i])
        if len(basis):
            orth = max(orth, float(np.linalg.norm(basis @ c)))
    return RVerificationReport(float(np.max(np.abs(R.traces()))), tang, orth)


def section_area_derivative(body4: ConvexBody, x_basis, lam, L, nu, h: float = 1e-3,
                            quad=(48, 96)) -> float:
    """Right derivative at 0 of ``a(t) = vol{x in X : F_t x in B}``.

    ``F_t(x) = x + t (L x + lam(x) nu)``; volumes are radial integrals in the
    fixed coordinates of X and the derivative uses the second-order one-sided
    stencil.
    """
    xb = coordinate_hyperplane(4) if x_basis is None else np.asarray(x_basis, float)
    pert = xb @ np.asarray(L, float) + np.outer(np.asarray(nu, float), np.asarray(lam, float))

    def a(t):
        return radial_volume(body4, xb + t * pert, quad=quad)

    return (-3.0 * a(0.0) + 4.0 * a(h) - a(2 * h)) / (2 * h)


# --------------------------------------------------------------------------
# finite-tilt probe

@dataclass
class TiltProbe:
    """Equivalence residuals between K and sections by strongly tilted hyperplanes."""

    covectors: np.ndarray
    residuals: np.ndarray
    tol: float

    @property
    def worst(self) -> float:
        return float(np.max(self.residuals)) if len(self.residuals) else 0.0

    @property
    def worst_covector(self) -> np.ndarray:
        return self.covectors[int(np.argmax(self.residuals))]

    @property
    def passed(self) -> bool:
        return self.worst <= self.tol


def tilt_probe(body4: ConvexBody, x_basis, nu, tol: float = 1e-4, n_random: int = 3,
               scale: float = 1.0, seed: int = 0, algebra=None) -> TiltProbe:
    """Compare K with sections by hyperplanes tilted by finite covectors.

    Infinitesimal tilts cannot separate every non-ellipsoidal body (for the
    l4 ball, coordinate tilts only rescale axes); finite tilts along mixed
    directions do.  Probed covectors are ``scale * (1,1,0)/sqrt2``,
    ``scale * (1,1,1)/sqrt3``, ``scale * (1,-1,1)/sqrt3`` and ``n_random``
    seeded random ones of the same length.
    """
    xb, nu, K = _setup(body4, x_basis, nu)
    if algebra is None:
        algebra = self_equivalence_algebra(K)
    rng = np.random.default_rng(seed)
    dirs = [np.array([1.0, 1.0, 0.0]), np.array([1.0, 1.0, 1.0]), np.array([1.0, -1.0, 1.0])]
    dirs += list(rng.standard_normal((n_random, 3)))
    lams = np.array([scale * d / np.linalg.norm(d) for d in dirs])
    res = []
    for lam in lams:
        k_lam = SectionBody(body4, hyperplane_graph(lam, nu, xb))
        r = find_equivalence(K, k_lam, tol=tol, algebra=algebra, seed=seed)
        res.append(r.residual)
        if r.residual > tol:
            break
    return TiltProbe(lams[: len(res)], np.array(res), tol)
