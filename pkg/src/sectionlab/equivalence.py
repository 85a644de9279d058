"""Linear equivalence of convex bodies, symmetry algebras, invariant metrics.

Two bodies are compared after normalizing their minimal enclosing (Loewner)
ellipsoids to the unit ball; a linear equivalence then differs from an
orthogonal map by the two normalizations, so the search runs over O(k) and is
finally polished over GL(k).  When the source body has a positive-dimensional
symmetry group, the match is moved along that group to the point nearest to
the identity in a caller-supplied metric.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from scipy.linalg import expm, sqrtm
from scipy.optimize import least_squares, minimize

from .body import ConvexBody, boundary_points
from .errors import LoewnerNonconvergence
from .grids import sphere_grid

__all__ = [
    "EquivalenceResult", "SymmetryAlgebra", "loewner_ellipsoid",
    "linear_equivalence", "find_equivalence", "self_equivalence_algebra",
    "invariant_inner_product", "default_grid", "quat_to_rot",
]


def default_grid(dim: int, n: Optional[int] = None) -> np.ndarray:
    """Unit directions used for boundary sampling of k-dimensional sections."""
    if n is None:
        n = {2: 720, 3: 2048}.get(dim, 4096)
    return sphere_grid(dim, n)


def _samples(body: ConvexBody, grid=None, n=None) -> np.ndarray:
    if grid is None:
        grid = default_grid(body.dim, n)
    return boundary_points(body, grid)


# --------------------------------------------------------------------------
# Loewner ellipsoid

def _ky_start(x: np.ndarray) -> np.ndarray:
    """Initial weights on ``d`` extreme points along successive orthogonal directions."""
    n, d = x.shape
    rng = np.random.default_rng(0)
    basis = np.zeros((d, 0))
    sel = []
    for _ in range(d):
        v = rng.standard_normal(d)
        v -= basis @ (basis.T @ v)
        k = int(np.argmax(np.abs(x @ v)))
        sel.append(k)
        p = x[k] - basis @ (basis.T @ x[k])
        basis = np.column_stack([basis, p / np.linalg.norm(p)])
    u = np.zeros(n)
    u[sel] = 1.0 / d
    return u


def _restricted_weights(x: np.ndarray, u0: np.ndarray) -> np.ndarray:
    # maximize log det of the moment matrix over the simplex on a small point set
    def f(w):
        m = x.T @ (w[:, None] * x)
        sign, logdet = np.linalg.slogdet(m)
        if sign <= 0:
            return 1e10, np.zeros_like(w)
        g = np.einsum("ij,jk,ik->i", x, np.linalg.inv(m), x)
        return -logdet, -g

    cons = {"type": "eq", "fun": lambda w: w.sum() - 1.0,
            "jac": lambda w: np.ones_like(w)}
    res = minimize(f, u0, jac=True, method="SLSQP", bounds=[(0.0, 1.0)] * len(u0),
                   constraints=[cons], options={"ftol": 1e-15, "maxiter": 500})
    w = np.clip(res.x, 0.0, None)
    return w / w.sum()


def _mvee_centered(x: np.ndarray, tol: float, max_iter: int, polish_every: int = 200,
                   active: float = 1e-3, max_active: int = 200):
    """Minimal origin-centred ellipsoid containing the rows of ``x``.

    Frank-Wolfe iteration with away steps on the dual weights, started from
    extreme points and updated by rank-one corrections.  Every
    ``polish_every`` steps the weights are re-solved on the near-active set,
    which removes the slow tail when many samples almost touch the ellipsoid.
    Returns the form ``Q`` of ``{z : z^T Q z <= 1}`` and the iteration count.
    """
    n, d = x.shape
    u = _ky_start(x)
    it = 0
    while it < max_iter:
        minv = np.linalg.inv(x.T @ (u[:, None] * x))
        g = np.einsum("ij,jk,ik->i", x, minv, x)
        for _ in range(min(polish_every, max_iter - it)):
            it += 1
            j = int(np.argmax(g))
            kmax = g[j]
            gm = np.where(u > 0, g, np.inf)
            jm = int(np.argmin(gm))
            kmin = gm[jm]
            up = kmax / d - 1.0
            dn = 1.0 - kmin / d
            if max(up, dn) <= tol:
                return minv / d, it
            if up >= dn:
                a = (kmax - d) / (d * (kmax - 1.0))
                u *= 1.0 - a
                u[j] += a
                k, kk, c, s = j, kmax, a / (1.0 - a), 1.0 - a
            else:
                a = min((d - kmin) / (d * (kmin - 1.0)), u[jm] / (1.0 - u[jm]))
                u *= 1.0 + a
                u[jm] = max(u[jm] - a, 0.0)
                k, kk, c, s = jm, kmin, -a / (1.0 + a), 1.0 + a
            # Sherman-Morrison for M <- s (M + c x_k x_k^T)
            mx = minv @ x[k]
            y = x @ mx
            minv = (minv - c * np.outer(mx, mx) / (1.0 + c * kk)) / s
            g = (g - c * y * y / (1.0 + c * kk)) / s
        if it >= max_iter:
            break
        act = np.flatnonzero((u > 1e-12) | (g >= d * (1.0 - active)))
        if len(act) > max_active:
            act = act[np.argsort(-g[act])[:max_active]]
        w = _restricted_weights(x[act], u[act] + 1e-3 / len(act))
        u = np.zeros(n)
        u[act] = w
        it += 1
    raise LoewnerNonconvergence(f"no convergence after {max_iter} iterations")


def loewner_ellipsoid(section: ConvexBody, grid=None, tol: float = 1e-9,
                      max_iter: int = 10_000) -> np.ndarray:
    """Minimal-volume origin-centred ellipsoid enclosing sampled boundary points.

    Parameters
    ----------
    section : ConvexBody
        Body (typically a :class:`~sectionlab.sections.SectionBody`).
    grid : array_like, optional
        Unit directions to sample; a default grid is used otherwise.
    tol : float
        Relative optimality tolerance of the dual weights (bounds the volume
        excess of the returned ellipsoid).
    max_iter : int

    Returns
    -------
    ndarray
        Symmetric positive definite ``Q`` with the ellipsoid ``{x^T Q x <= 1}``.
    """
    x = _samples(section, grid)
    x = np.vstack([x, -x]) if not section.symmetric else x
    q, _ = _mvee_centered(x, tol, max_iter)
    return 0.5 * (q + q.T)


# --------------------------------------------------------------------------
# orthogonal group parametrizations

def quat_to_rot(q) -> np.ndarray:
    a, b, c, d = np.asarray(q, dtype=float) / np.linalg.norm(q)
    return np.array([
        [a * a + b * b - c * c - d * d, 2 * (b * c - a * d), 2 * (b * d + a * c)],
        [2 * (b * c + a * d), a * a - b * b + c * c - d * d, 2 * (c * d - a * b)],
        [2 * (b * d - a * c), 2 * (c * d + a * b), a * a - b * b - c * c + d * d],
    ])


def _orth(params, k, s):
    if k == 2:
        c, sn = np.cos(params[0]), np.sin(params[0])
        return np.array([[c, -sn], [sn, c]]) @ np.diag([1.0, s])
    return s * quat_to_rot(params)


def _orth_starts(k, n_starts, rng):
    half = max(1, n_starts // 2)
    out = []
    for s in (1.0, -1.0):
        if k == 2:
            ps = [np.array([0.0])] + [rng.uniform(-np.pi, np.pi, 1) for _ in range(half - 1)]
        else:
            ps = [np.array([1.0, 0, 0, 0])] + [rng.standard_normal(4) for _ in range(half - 1)]
        out += [(p, s) for p in ps]
    return out


# --------------------------------------------------------------------------
# symmetry algebra

@dataclass
class SymmetryAlgebra:
    """Trace-free linear fields tangent to the boundary of a body."""

    basis: np.ndarray
    singular_values: np.ndarray
    tol: float

    @property
    def dim(self) -> int:
        return int(self.basis.shape[0])


def _sl_basis(k: int) -> np.ndarray:
    """Frobenius-orthonormal basis of the trace-free k x k matrices."""
    mats = []
    for i in range(k):
        for j in range(k):
            if i != j:
                m = np.zeros((k, k))
                m[i, j] = 1.0
                mats.append(m)
    for i in range(k - 1):
        m = np.zeros((k, k))
        m[np.arange(i + 1), np.arange(i + 1)] = 1.0
        m[i + 1, i + 1] = -(i + 1.0)
        mats.append(m / np.linalg.norm(m))
    return np.array(mats)


def self_equivalence_algebra(K: ConvexBody, tol: float = 1e-6, grid=None) -> SymmetryAlgebra:
    """Near-null space of the tangency operator on trace-free matrices.

    The operator sends ``L`` to the residuals ``<grad Psi(x), L x>`` over
    boundary samples ``x`` (scaled to root-mean-square); singular directions
    below ``tol`` are the infinitesimal self-equivalences.
    """
    x = _samples(K, grid)
    g = K.grad(x)
    basis = _sl_basis(K.dim)
    op = np.einsum("ni,bij,nj->nb", g, basis, x) / np.sqrt(len(x))
    _, s, vt = np.linalg.svd(op, full_matrices=False)
    null = vt[s < tol]
    mats = np.einsum("mb,bij->mij", null, basis) if len(null) else np.zeros((0, K.dim, K.dim))
    return SymmetryAlgebra(mats, s, tol)


# --------------------------------------------------------------------------
# equivalence search

@dataclass
class EquivalenceResult:
    """Linear map ``F`` with ``F(K1) = K2`` and its boundary mismatch.

    ``residual`` is the largest ``|Psi_2(F y) - 1|`` over boundary samples
    ``y`` of ``K1``; ``distance`` the tie-break objective of the returned map.
    """

    map: np.ndarray
    residual: float
    distance: float = float("nan")
    candidates: list = field(default_factory=list, repr=False)


def _sup_residual(K2, f, y):
    return float(np.max(np.abs(K2.norm(y @ f.T) - 1.0)))


def _minimax_polish(K2, f0, y):
    """Refine a map by minimizing the sup mismatch (epigraph form)."""
    k = f0.shape[0]

    def cons(z):
        f = z[:-1].reshape(k, k)
        r = K2.norm(y @ f.T) - 1.0
        return np.concatenate([z[-1] - r, z[-1] + r])

    z0 = np.concatenate([f0.ravel(), [_sup_residual(K2, f0, y)]])
    res = minimize(lambda z: z[-1], z0, method="SLSQP",
                   constraints=[{"type": "ineq", "fun": cons}],
                   options={"maxiter": 200, "ftol": 1e-12})
    f = res.x[:-1].reshape(k, k)
    return f, _sup_residual(K2, f, y)


def find_equivalence(K1: ConvexBody, K2: ConvexBody, tol: float = 1e-4,
                     n_starts: int = 32, seed: int = 0,
                     distance: Optional[Callable] = None,
                     algebra: Optional[SymmetryAlgebra] = None,
                     grid=None, n_search: Optional[int] = None) -> EquivalenceResult:
    """Best linear map from ``K1`` onto ``K2`` (always returns a result).

    Parameters
    ----------
    K1, K2 : ConvexBody
        Bodies of equal dimension 2 or 3.
    tol : float
        Acceptance threshold on the sup mismatch; candidates within it take
        part in the tie-break.
    n_starts : int
        Number of local searches over O(k), split between both determinants.
    seed : int
    distance : callable, optional
        ``F -> residual vector`` whose squared norm is the tie-break objective;
        defaults to ``F - I`` (Frobenius distance to the identity).
    algebra : SymmetryAlgebra, optional
        Infinitesimal symmetries of ``K1``; computed when omitted.
    grid : array_like, optional
        Unit directions for boundary sampling of ``K1``.
    n_search : int, optional
        Number of samples used inside the orthogonal search.
    """
    k = K1.dim
    if K2.dim != k or k not in (2, 3):
        raise ValueError("bodies must share dimension 2 or 3")
    rng = np.random.default_rng(seed)
    if distance is None:
        def distance(f):
            return (f - np.eye(k)).ravel()

    y = _samples(K1, grid)
    n_search = n_search or (240 if k == 2 else 400)
    ys = y[np.linspace(0, len(y) - 1, min(n_search, len(y))).astype(int)]

    n1 = np.real(sqrtm(loewner_ellipsoid(K1)))
    n2 = np.real(sqrtm(loewner_ellipsoid(K2)))
    n2inv = np.linalg.inv(n2)
    zs = ys @ n1.T

    def resid(p, s):
        o = _orth(p, k, s)
        r = K2.norm(zs @ (n2inv @ o).T) - 1.0
        if k == 3:
            r = np.append(r, np.dot(p, p) - 1.0)
        return r

    found = []
    for p0, s in _orth_starts(k, n_starts, rng):
        sol = least_squares(resid, p0, args=(s,), method="trf", xtol=1e-10, ftol=1e-10,
                            max_nfev=400)
        o = _orth(sol.x, k, s)
        f = n2inv @ o @ n1
        found.append((_sup_residual(K2, f, ys), f))
    found.sort(key=lambda t: t[0])
    best = found[0][0]
    keep = []
    for r, f in found:
        if r > max(10 * best, tol):
            break
        if all(np.linalg.norm(f - g) > 1e-3 for _, g in keep):
            keep.append((r, f))
        if len(keep) >= 8:
            break

    def gl_resid(z):
        return K2.norm(y @ z.reshape(k, k).T) - 1.0

    polished = []
    for _, f in keep:
        sol = least_squares(gl_resid, f.ravel(), method="trf", xtol=1e-15, ftol=1e-15,
                            gtol=1e-15, max_nfev=400)
        g = sol.x.reshape(k, k)
        polished.append((_sup_residual(K2, g, y), g))
    polished.sort(key=lambda t: t[0])

    if polished[0][0] > tol:
        g, r = _minimax_polish(K2, polished[0][1], y)
        if r < polished[0][0]:
            polished[0] = (r, g)
        if r > tol:
            d = float(np.sum(np.asarray(distance(polished[0][1])) ** 2))
            return EquivalenceResult(polished[0][1], polished[0][0], d, polished)

    good = [(r, g) for r, g in polished if r <= tol]
    if algebra is None:
        algebra = self_equivalence_algebra(K1)
    best_map, best_d, best_r = None, np.inf, np.inf
    for r, g in good:
        if algebra.dim:
            basis = algebra.basis

            def fun(c):
                return np.asarray(distance(g @ expm(np.tensordot(c, basis, 1))))

            starts = [np.zeros(algebra.dim)] + [rng.normal(0, 1.5, algebra.dim) for _ in range(3)]
            for c0 in starts:
                sol = least_squares(fun, c0, method="trf", xtol=1e-12, ftol=1e-12, gtol=1e-12)
                gm = g @ expm(np.tensordot(sol.x, basis, 1))
                d = float(np.sum(sol.fun ** 2))
                if d < best_d - 1e-14:
                    best_map, best_d = gm, d
        else:
            d = float(np.sum(np.asarray(distance(g)) ** 2))
            if d < best_d:
                best_map, best_d = g, d
    best_r = _sup_residual(K2, best_map, y)
    return EquivalenceResult(best_map, best_r, best_d, polished)


def linear_equivalence(K1: ConvexBody, K2: ConvexBody, tol: float = 1e-4,
                       **kwargs) -> Optional[EquivalenceResult]:
    """Linear map taking ``K1`` onto ``K2``, or ``None`` if none is found.

    See :func:`find_equivalence` for the keyword arguments.
    """
    res = find_equivalence(K1, K2, tol=tol, **kwargs)
    return res if res.residual <= tol else None


# --------------------------------------------------------------------------
# invariant inner product

def invariant_inner_product(K: ConvexBody, tol: float = 1e-6, algebra=None,
                            finite: Optional[list] = None, sweeps: int = 20,
                            n_t: int = 8, seed: int = 0) -> np.ndarray:
    """Inner product on R^k invariant under the self-equivalences of ``K``.

    Starting from the Loewner form, the form is averaged over each sampled
    one-parameter subgroup ``exp(t L)`` (uniform nodes over one period) and
    over the detected finite symmetries, repeating until it is stationary.
    The result is scaled so that its mean over boundary samples of ``K`` is 1.

    Parameters
    ----------
    K : ConvexBody
    tol : float
        Threshold for the symmetry algebra and for accepting finite
        symmetries (as an equivalence residual, scaled by 100).
    algebra : SymmetryAlgebra, optional
    finite : list of ndarray, optional
        Known finite symmetries; otherwise they are detected by a K -> K
        equivalence search.
    """
    p = loewner_ellipsoid(K, tol=1e-12, max_iter=200_000)
    if algebra is None:
        algebra = self_equivalence_algebra(K, tol)
    if finite is None:
        res = find_equivalence(K, K, tol=100 * tol, algebra=algebra, seed=seed)
        finite = [g for r, g in res.candidates if r <= 100 * tol]
    group = [np.eye(K.dim)] + [np.asarray(g) for g in finite]
    s = np.real(sqrtm(p))
    sinv = np.linalg.inv(s)
    loops = []
    for a in algebra.basis:
        w = np.abs(np.linalg.eigvals(s @ a @ sinv).imag).max()
        if w > 1e-12:
            ts = 2 * np.pi * np.arange(n_t) / (n_t * w)
            loops.append([expm(t * a) for t in ts])
    for _ in range(sweeps):
        old = p
        for loop in loops:
            p = np.mean([g.T @ p @ g for g in loop], axis=0)
        p = np.mean([g.T @ p @ g for g in group], axis=0)
        p = 0.5 * (p + p.T)
        if np.max(np.abs(p - old)) < 1e-15 * np.max(np.abs(p)):
            break
    x = _samples(K)
    p = p / np.mean(np.einsum("ni,ij,nj->n", x, p, x))
    return 0.5 * (p + p.T)
