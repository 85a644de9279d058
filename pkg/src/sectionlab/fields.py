"""Quadratic fields built from a tensor R and its degeneracy strata.

``V_{lam,mu}(x) = mu(x) R_lam(x) - lam(x) R_mu(x)`` is quadratic in ``x`` and
antisymmetric in ``(lam, mu)``.  The triple ``V_i = V_{f_{i+1}, f_{i+2}}``
(indices mod 3) satisfies ``sum_i x_i V_i(x) = 0`` and determines R.  A point
``p`` is degenerate when ``{R_lam(p) : lam(p) = 0}`` is less than
two-dimensional; if every point is degenerate the 3 x 3 polynomial matrix
``[V_1 V_2 V_3]`` has rank one and factors in one of three shapes.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache
from typing import Optional

import numpy as np
from scipy.optimize import least_squares

from .algebra import (PolyVectorField, _mult_table, divide_by_linear_form,
                      linear_field, linear_form, monomials)
from .errors import DegeneracyMismatch, Inconsistent, NotDivisible
from .grids import circle_grid, fibonacci_sphere, tangent_frame
from .tensor import TensorR

__all__ = [
    "DegeneracyRecord", "t_r_dim", "v_field", "v_triple", "v_triple_coeffs",
    "euler_residual", "reconstruct_r", "reconstruct_r_coeffs", "Rank1Factorization",
    "rank1_factorize", "DegenerateSet", "degenerate_set_sample",
    "planar_cubic_field", "planar_zeros", "reduce_planar_field", "invariant_form",
    "span_angles",
]


# --------------------------------------------------------------------------
# degeneracy at a point

@dataclass
class DegeneracyRecord:
    """Dimension of ``T^R_p = {R_lam(p) : lam(p) = 0}`` and its singular values."""

    point: np.ndarray
    singular_values: np.ndarray
    dim: int

    @property
    def degenerate(self) -> bool:
        return bool(np.linalg.norm(self.point) > 0 and self.dim < 2)


def _t_matrix(R: TensorR, p: np.ndarray) -> np.ndarray:
    """3 x 2 matrix of ``R_lam(p)`` over a basis of covectors vanishing at p."""
    u, v = tangent_frame(p)
    return np.column_stack([R.apply(u, p), R.apply(v, p)])


def t_r_dim(R: TensorR, p, tol: float = 1e-6) -> DegeneracyRecord:
    """Dimension of the tangent-candidate space ``T^R_p``.

    Singular values are thresholded at ``tol`` times the larger of the top
    singular value and ``|R| |p|``, so a vanishing matrix has dimension 0.
    """
    p = np.asarray(p, dtype=float)
    if np.linalg.norm(p) == 0.0:
        return DegeneracyRecord(p, np.zeros(2), 0)
    s = np.linalg.svd(_t_matrix(R, p), compute_uv=False)
    scale = max(s[0], R.norm * np.linalg.norm(p))
    return DegeneracyRecord(p, s, int(np.sum(s > tol * scale)) if scale > 0 else 0)


# --------------------------------------------------------------------------
# the fields V

@lru_cache(maxsize=None)
def _tables():
    t11 = np.asarray(_mult_table(3, 1, 1))            # (9, 6): x_a x_k
    t12 = np.asarray(_mult_table(3, 1, 2))            # (18, 10): x_a * quadratic
    return t11, t12


def _v_coeffs(c: np.ndarray, lam, mu) -> np.ndarray:
    """Coefficients (..., 3, 6) of ``V_{lam,mu}`` for tensors ``c`` (..., 3, 3, 3)."""
    t11, _ = _tables()
    lam = np.asarray(lam, dtype=float)
    mu = np.asarray(mu, dtype=float)
    rl = np.tensordot(lam, c, axes=(0, -3))
    rm = np.tensordot(mu, c, axes=(0, -3))
    m = mu[:, None] * rl[..., None, :] - lam[:, None] * rm[..., None, :]
    # m[..., j, a, k]: coefficient of x_a x_k in component j
    return m.reshape(m.shape[:-2] + (9,)) @ t11


def v_field(R: TensorR, lam, mu) -> PolyVectorField:
    """The quadratic field ``mu(x) R_lam(x) - lam(x) R_mu(x)``."""
    return PolyVectorField(3, 2, _v_coeffs(R.coeffs, lam, mu))


def v_triple_coeffs(c: np.ndarray) -> np.ndarray:
    """Coefficients (..., 3, 3, 6) of ``(V_1, V_2, V_3)`` for a stack of tensors."""
    eye = np.eye(3)
    return np.stack([_v_coeffs(c, eye[(i + 1) % 3], eye[(i + 2) % 3]) for i in range(3)],
                    axis=-3)


def euler_residual(vc: np.ndarray) -> np.ndarray:
    """Largest coefficient of ``sum_i x_i V_i`` for triples (..., 3, 3, 6)."""
    _, t12 = _tables()
    eye = np.eye(3)
    # outer product of x_i with V_i, summed over i
    outer = np.einsum("ia,...ijm->...jam", eye, vc)
    cubic = outer.reshape(outer.shape[:-2] + (18,)) @ t12
    return np.max(np.abs(cubic), axis=(-2, -1))


def v_triple(R: TensorR):
    """``(V_1, V_2, V_3)`` and the Euler residual of ``sum_i x_i V_i``."""
    vc = v_triple_coeffs(R.coeffs)
    fields = tuple(PolyVectorField(3, 2, vc[i]) for i in range(3))
    return fields, float(euler_residual(vc))


@lru_cache(maxsize=None)
def _recon_operator():
    """Linear map from R (27 entries) to (V_23, V_31, V_12) plus traces, and its pseudo-inverse."""
    basis = np.eye(27).reshape(27, 3, 3, 3)
    vc = v_triple_coeffs(basis).reshape(27, -1)
    tr = np.trace(basis, axis1=2, axis2=3)
    a = np.hstack([vc, tr]).T
    return a, np.linalg.pinv(a)


def reconstruct_r_coeffs(vc: np.ndarray):
    """Least-squares R from triples (..., 3, 3, 6); returns (coeffs, residual)."""
    a, ainv = _recon_operator()
    flat = vc.reshape(vc.shape[:-3] + (54,))
    b = np.concatenate([flat, np.zeros(flat.shape[:-1] + (3,))], axis=-1)
    r = b @ ainv.T
    res = np.max(np.abs(r @ a.T - b), axis=-1)
    return r.reshape(r.shape[:-1] + (3, 3, 3)), res


def reconstruct_r(v23: PolyVectorField, v31: PolyVectorField, v12: PolyVectorField,
                  tol: float = 1e-8) -> TensorR:
    """Recover the trace-free tensor from ``V_{23}, V_{31}, V_{12}``.

    Raises
    ------
    Inconsistent
        If the least-squares residual exceeds ``tol`` (relative to the input
        scale when that exceeds 1).
    """
    vc = np.stack([v23.coeffs, v31.coeffs, v12.coeffs])
    c, res = reconstruct_r_coeffs(vc)
    scale = max(1.0, float(np.max(np.abs(vc))))
    if res > tol * scale:
        raise Inconsistent(f"V fields do not come from a trace-free tensor (residual {res:.3e})")
    out = TensorR(c)
    out.info["residual"] = float(res)
    return out


# --------------------------------------------------------------------------
# rank-one factorization

@dataclass
class Rank1Factorization:
    """Factorization ``V_i = a(x) b_i(x)`` of a rank-one polynomial matrix.

    ``case`` is one of ``"Zero"``, ``"ConstantTimesQuadratic"`` (``V_i = C_i Q``),
    ``"LinearTimesLinear"`` (``V_i = ell_i(x) L x``),
    ``"QuadraticTimesVector"`` (``V_i = Q_i(x) v``) or ``"NotRank1"``.
    """

    case: str
    factors: dict = field(default_factory=dict)
    residual: float = 0.0
    minor_norm: float = 0.0


def _minor_norm(vc: np.ndarray) -> float:
    """Largest coefficient norm of the 2 x 2 minors of ``M[j, i] = (V_i)_j``."""
    t22 = np.asarray(_mult_table(3, 2, 2))
    worst = 0.0
    for j1 in range(3):
        for j2 in range(j1 + 1, 3):
            for i1 in range(3):
                for i2 in range(i1 + 1, 3):
                    m = (np.outer(vc[i1, j1], vc[i2, j2]) - np.outer(vc[i2, j1], vc[i1, j2]))
                    worst = max(worst, float(np.linalg.norm(m.ravel() @ t22)))
    return worst


def _factor_quadratic(q: np.ndarray):
    """Candidate linear factors of a scalar quadratic (coefficients in monomial order)."""
    s = np.zeros((3, 3))
    for coef, e in zip(q, monomials(3, 2)):
        idx = [k for k in range(3) for _ in range(e[k])]
        if idx[0] == idx[1]:
            s[idx[0], idx[0]] += coef
        else:
            s[idx[0], idx[1]] += coef / 2
            s[idx[1], idx[0]] += coef / 2
    w, u = np.linalg.eigh(s)
    order = np.argsort(-np.abs(w))
    w, u = w[order], u[:, order]
    cands = []
    if abs(w[1]) <= 1e-9 * abs(w[0]):
        cands.append(np.sqrt(abs(w[0])) * u[:, 0])
    else:
        pos, neg = (0, 1) if w[0] > 0 else (1, 0)
        a, b = np.sqrt(abs(w[pos])) * u[:, pos], np.sqrt(abs(w[neg])) * u[:, neg]
        cands += [a + b, a - b]
    return cands


def rank1_factorize(V1: PolyVectorField, V2: PolyVectorField, V3: PolyVectorField,
                    tol: float = 1e-8) -> Rank1Factorization:
    """Decide whether ``[V_1 V_2 V_3]`` has rank at most one and factor it.

    The rank test uses the coefficient norms of all 2 x 2 minors (relative to
    the squared coefficient scale).  Factor shapes are tried in the order
    constant x quadratic, quadratic x vector, linear x linear; in the last case
    the pivot entry is split into two linear forms and polynomial division
    recovers the remaining factors.  The linear field ``L`` is normalized to
    unit Frobenius norm.
    """
    vc = np.stack([V1.coeffs, V2.coeffs, V3.coeffs])  # (i, j, m)
    scale = float(np.max(np.abs(vc)))
    if scale <= tol:
        return Rank1Factorization("Zero", {}, 0.0, 0.0)
    mn = _minor_norm(vc / scale)
    if mn > tol:
        return Rank1Factorization("NotRank1", {}, float("nan"), mn)

    def check(rec):
        return float(np.max(np.abs(rec - vc))) / scale

    # constant times quadratic field: columns proportional
    i0 = int(np.argmax(np.linalg.norm(vc.reshape(3, -1), axis=1)))
    piv = vc[i0].ravel()
    c = vc.reshape(3, -1) @ piv / (piv @ piv)
    rec = c[:, None, None] * vc[i0][None]
    if check(rec) <= tol:
        return Rank1Factorization("ConstantTimesQuadratic",
                                  {"C": c, "Q": PolyVectorField(3, 2, vc[i0])}, check(rec), mn)

    # quadratic scalars times a constant vector: rows proportional
    rows = vc.transpose(1, 0, 2).reshape(3, -1)
    u, s, vt = np.linalg.svd(rows)
    if s[1] <= tol * s[0]:
        v = u[:, 0]
        qs = (s[0] * vt[0]).reshape(3, 6)
        rec = qs[:, None, :] * v[None, :, None]
        if check(rec) <= tol:
            return Rank1Factorization("QuadraticTimesVector",
                                      {"v": v, "Q": [PolyVectorField(3, 2, q[None]) for q in qs]},
                                      check(rec), mn)

    # linear forms times a linear field
    norms = np.linalg.norm(vc, axis=2)  # (i, j)
    i0, a0 = np.unravel_index(np.argmax(norms), norms.shape)
    col = PolyVectorField(3, 2, vc[i0])
    best = None
    for ell0 in _factor_quadratic(vc[i0, a0]):
        try:
            lf = divide_by_linear_form(col, ell0, tol=1e-6)
            la = lf.coeffs[a0]
            ells = []
            for i in range(3):
                q = PolyVectorField(3, 2, vc[i, a0][None])
                ells.append(divide_by_linear_form(q, la, tol=1e-6).coeffs[0])
        except NotDivisible:
            continue
        ells = np.array(ells)
        lmat = lf.coeffs
        rec = np.stack([(linear_form(e) * linear_field(lmat)).coeffs for e in ells])
        r = check(rec)
        if best is None or r < best[0]:
            best = (r, ells, lmat)
    if best is not None and best[0] <= max(tol, 1e-8):
        r, ells, lmat = best
        k = np.linalg.norm(lmat)
        lmat, ells = lmat / k, ells * k
        flat = lmat.ravel()
        if flat[np.argmax(np.abs(flat))] < 0:
            lmat, ells = -lmat, -ells
        return Rank1Factorization("LinearTimesLinear", {"ell": ells, "L": lmat}, r, mn)
    return Rank1Factorization("NotRank1", {}, float("nan"), mn)


# --------------------------------------------------------------------------
# degenerate set

@dataclass
class DegenerateSet:
    """Sampled degeneracy locus of R on the unit sphere.

    ``kind`` is ``"empty"``, ``"proper"`` or ``"everything"``; ``points`` the
    degenerate samples (grid hits and refined minima); ``grid``/``dims`` the
    scan itself.
    """

    kind: str
    points: np.ndarray
    grid: np.ndarray
    dims: np.ndarray

    def to_csv(self, path) -> None:
        data = np.column_stack([self.grid, self.dims])
        np.savetxt(path, data, delimiter=",", header="p1,p2,p3,dim", comments="", fmt="%.17g")


def _cross_minors(R: TensorR, p: np.ndarray) -> np.ndarray:
    p = p / np.linalg.norm(p)
    m = _t_matrix(R, p)
    return np.cross(m[:, 0], m[:, 1])


def degenerate_set_sample(R: TensorR, grid=2048, tol: float = 1e-6,
                          n_refine: int = 24) -> DegenerateSet:
    """Scan ``dim T^R_p`` over the sphere and classify the degenerate set.

    Grid points are tested directly; in addition the smallest values of the
    minor vector ``|R_u(p) x R_v(p)|`` (``u, v`` spanning the covectors
    vanishing at ``p``) seed least-squares descents on the sphere, so thin
    degenerate sets such as planes are found.
    """
    pts = fibonacci_sphere(grid) if np.isscalar(grid) else np.asarray(grid, float)
    dims = np.array([t_r_dim(R, p, tol).dim for p in pts])
    scale = max(R.norm, 1e-300)
    if R.norm == 0:
        return DegenerateSet("everything", pts, pts, dims)
    found = [p for p, d in zip(pts, dims) if d < 2]
    if len(found) == len(pts):
        return DegenerateSet("everything", pts, pts, dims)
    vals = np.array([np.linalg.norm(_cross_minors(R, p)) for p in pts])
    order = np.argsort(vals)
    seeds = []
    for k in order:
        if all(abs(pts[k] @ s) < 0.95 for s in seeds):
            seeds.append(pts[k])
        if len(seeds) >= n_refine:
            break
    for s in seeds:
        sol = least_squares(lambda q: np.append(_cross_minors(R, q) / scale ** 2, q @ q - 1.0),
                            s, xtol=1e-14, ftol=1e-14, gtol=1e-14)
        q = sol.x / np.linalg.norm(sol.x)
        if t_r_dim(R, q, tol).dim < 2:
            found.append(q)
    kind = "proper" if found else "empty"
    points = np.array(found) if found else np.zeros((0, 3))
    return DegenerateSet(kind, points, pts, dims)


# --------------------------------------------------------------------------
# planar fields

def _change_basis(R: TensorR, t: np.ndarray) -> TensorR:
    """Express R in the basis given by the columns of ``t``."""
    ti = np.linalg.inv(t)
    # new dual basis covector i is the old covector row i of t^{-1}
    c = np.einsum("ij,jkl->ikl", ti, R.coeffs)
    return TensorR(np.einsum("ab,ibc,cd->iad", ti, c, t))


def planar_cubic_field(R: TensorR, z_basis, tol: float = 1e-6) -> PolyVectorField:
    """Cubic field ``W = f_3(G) F - f_3(F) G`` on the plane Z.

    In the basis ``(e_1, e_2, e_3)`` with ``e_1`` degenerate, ``e_2``
    nondegenerate (the columns of ``z_basis``) and ``e_3`` their normalized
    cross product: ``F(x) = R_{f_3}(x)``, ``G(x) = x_2 R_{f_1}(x) - x_1 R_{f_2}(x)``.

    Returns
    -------
    PolyVectorField
        Degree 3, two input variables (coordinates on Z) and three outputs in
        the adapted basis; the third output vanishes identically.

    Raises
    ------
    DegeneracyMismatch
        If ``e_1`` is not degenerate or ``e_2`` is degenerate at ``tol``.
    """
    zb = np.asarray(z_basis, dtype=float)
    e1, e2 = zb[:, 0], zb[:, 1]
    if t_r_dim(R, e1, tol).dim >= 2:
        raise DegeneracyMismatch("first basis vector is not a degenerate point")
    if t_r_dim(R, e2, tol).dim < 2:
        raise DegeneracyMismatch("second basis vector is degenerate")
    e3 = np.cross(e1, e2)
    e3 /= np.linalg.norm(e3)
    rn = _change_basis(R, np.column_stack([e1, e2, e3]))
    eye = np.eye(3)
    f = linear_field(rn(eye[2]))
    g = PolyVectorField(3, 2, _v_coeffs(rn.coeffs, eye[0], eye[1]))
    w = f.component(2) * g - g.component(2) * f
    # restrict to x_3 = 0
    keep = [k for k, e in enumerate(monomials(3, 3)) if e[2] == 0]
    return PolyVectorField(2, 3, w.coeffs[:, keep])


def planar_zeros(w: PolyVectorField, tol: float = 1e-9, n: int = 3600,
                 scan: float = 0.05) -> np.ndarray:
    """Directions (angles in [0, pi)) where a planar field vanishes.

    Strict local minima of ``|w|`` on an angular grid that fall below
    ``scan`` times the grid maximum are refined by least squares.
    """
    th = np.pi * np.arange(n) / n
    pts = np.column_stack([np.cos(th), np.sin(th)])
    val = np.linalg.norm(w(pts)[:, :2], axis=1)
    scale = max(w.max_abs_coeff(), 1e-300)
    prev, nxt = np.roll(val, 1), np.roll(val, -1)
    cand = np.flatnonzero((val <= prev) & (val <= nxt) & ((val < prev) | (val < nxt))
                          & (val <= scan * val.max()))
    out = []
    for k in cand:
        sol = least_squares(lambda t: w(np.array([np.cos(t[0]), np.sin(t[0])]))[:2] / scale,
                            [th[k]], xtol=1e-15, ftol=1e-15, gtol=1e-15)
        if np.linalg.norm(sol.fun) <= tol:
            t = float(np.mod(sol.x[0], np.pi))
            if all(min(abs(t - s), np.pi - abs(t - s)) > 1e-6 for s in out):
                out.append(t)
    return np.array(sorted(out))


def reduce_planar_field(w: PolyVectorField, tol: float = 1e-9):
    """Divide a planar field by the linear forms of its zero lines.

    Returns the reduced field (first two outputs only) and the angles of the
    removed zero lines.  A reduced field of degree 1 without zeros is a
    linear field whose orbits are ellipses.
    """
    cur = PolyVectorField(2, w.degree, w.coeffs[:2])
    removed = []
    while cur.degree > 0:
        zs = planar_zeros(cur, tol)
        if not len(zs):
            break
        t = zs[0]
        try:
            cur = divide_by_linear_form(cur, np.array([-np.sin(t), np.cos(t)]), tol=1e-6)
        except NotDivisible:
            break
        removed.append(t)
    return cur, np.array(removed)


def invariant_form(L) -> Optional[np.ndarray]:
    """Positive definite ``S`` with ``L^T S + S L = 0`` (trace normalized), if any."""
    L = np.asarray(L, dtype=float)
    k = L.shape[0]
    eye = np.eye(k)
    op = np.kron(L.T, eye) + np.kron(eye, L.T)
    _, s, vt = np.linalg.svd(op)
    null = vt[s <= 1e-9 * max(s[0], 1.0)]
    # with a multi-dimensional null space no single basis vector need be
    # definite; the projection of the identity is tried first
    cands = ([null.T @ (null @ eye.ravel())] if len(null) else []) + list(null)
    for v in cands:
        m = v.reshape(k, k)
        m = 0.5 * (m + m.T)
        if np.trace(m) < 0:
            m = -m
        if np.all(np.linalg.eigvalsh(m) > 0):
            return m / np.trace(m) * k
    return None


def span_angles(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Principal angles between the column spans of ``a`` and ``b``."""
    qa, _ = np.linalg.qr(a)
    qb, _ = np.linalg.qr(b)
    s = np.linalg.svd(qa.T @ qb, compute_uv=False)
    return np.arccos(np.clip(s, -1.0, 1.0))
