"""Ellipse and ellipsoid detection, norm-one projectors, and the full pipeline.

The four-dimensional certificate chains the earlier modules: transversal
``nu``, finite-tilt and infinitesimal equivalence checks, the tensor R by
both routes, a degeneracy branch that produces a quadratic form for the
section ``K = B cap X``, the cylinder containment ``B subset K + R nu``,
norm-one projectors onto sampled hyperplanes, and a final quadratic fit of
``B`` itself.  Every stage reports a residual next to the gate it is held to.
"""

from __future__ import annotations

import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, asdict
from typing import Optional

import numpy as np
from scipy.optimize import minimize

from .body import ConvexBody, boundary_points, dir_deriv, symmetry_check
from .equivalence import default_grid, invariant_inner_product, loewner_ellipsoid, \
    self_equivalence_algebra
from .errors import (EquivalenceFailed, IncompatibleSections, IndefiniteFit, Inconsistent,
                     NotElliptic, SectionLabError, CDegenerate)
from .fields import (degenerate_set_sample, invariant_form, planar_cubic_field,
                     rank1_factorize, reduce_planar_field, t_r_dim, v_triple)
from .flow import fixed_points, orbit_classify, plane_flow_field
from .grids import circle_grid, fibonacci_sphere, sphere_grid, tangent_frame
from .sections import SectionBody, choose_nu, coordinate_hyperplane, nu_kernel_residual
from .tensor import TensorR, build_r_orbit, build_r_smooth, tilt_probe, verify_r

__all__ = [
    "fit_ellipse", "EllipticSections", "elliptic_sections", "SectionForm",
    "q_from_three_sections", "sections_from_bivectors", "psi_equals_q",
    "min_norm_projector", "DegenerateOutcome", "classify_degenerate", "CertifyConfig",
    "Stage", "Certificate", "certify_ellipsoid_4d", "fit_quadric",
]


# --------------------------------------------------------------------------
# quadratic fits

def fit_quadric(x: np.ndarray) -> tuple[np.ndarray, float]:
    """Least-squares symmetric ``Q`` with ``x^T Q x = 1`` on the rows of ``x``."""
    d = x.shape[1]
    iu = np.triu_indices(d)
    mult = np.where(iu[0] == iu[1], 1.0, 2.0)
    a = x[:, iu[0]] * x[:, iu[1]] * mult
    coef, *_ = np.linalg.lstsq(a, np.ones(len(x)), rcond=None)
    q = np.zeros((d, d))
    q[iu] = coef
    q = q + q.T - np.diag(np.diag(q))
    res = float(np.max(np.abs(np.einsum("ni,ij,nj->n", x, q, x) - 1.0)))
    return q, res


def fit_ellipse(section2: ConvexBody, grid=720) -> tuple[np.ndarray, float]:
    """Quadratic form of the ellipse best fitting a planar section.

    Boundary samples ``x / Psi(x)`` along ``grid`` directions are fit by
    least squares; the residual is ``max |Q(x, x) - 1|``.

    Raises
    ------
    IndefiniteFit
        If the fitted form is not positive definite.
    """
    dirs = circle_grid(grid) if np.isscalar(grid) else np.asarray(grid, float)
    q, res = fit_quadric(boundary_points(section2, dirs))
    if np.linalg.eigvalsh(q)[0] <= 0:
        raise IndefiniteFit("fitted conic is not an ellipse")
    return q, res


def _plane_section(body3: ConvexBody, sigma) -> SectionBody:
    u, v = tangent_frame(np.asarray(sigma, float))
    return SectionBody(body3, np.column_stack([u, v]))


def psi_equals_q(body: ConvexBody, Q, grid=None) -> float:
    """``max |Psi(x)^2 - Q(x, x)|`` over unit vectors ``x`` (Euclidean sphere)."""
    if grid is None:
        x = default_grid(body.dim)
    elif np.isscalar(grid):
        x = sphere_grid(body.dim, int(grid))
    else:
        x = np.asarray(grid, dtype=float)
    Q = np.asarray(Q, dtype=float)
    return float(np.max(np.abs(body.norm(x) ** 2 - np.einsum("ni,ij,nj->n", x, Q, x))))


# --------------------------------------------------------------------------
# elliptic sections

@dataclass
class EllipticSections:
    """Candidate bivectors, their ellipse-fit residuals and the accepted subset."""

    directions: np.ndarray
    residuals: np.ndarray
    members: np.ndarray
    independent: bool
    identically_zero: bool
    n_fixed: int
    gate: float

    @property
    def elliptic(self) -> np.ndarray:
        return self.directions[self.members]


def elliptic_sections(body3: ConvexBody, R: TensorR, gate: float = 1e-5, n_orbits: int = 4,
                      T: float = 30.0, dt: float = 1e-2, n_extra: int = 32,
                      seed: int = 0) -> EllipticSections:
    """Sections at zeros of the plane flow, and along orbits reaching them.

    If the plane flow vanishes identically every plane is a zero; then the
    coordinate bivectors and ``n_extra`` grid bivectors are tested.  Members
    are candidates whose ellipse fit residual is at most ``gate``.
    """
    W = plane_flow_field(R)
    fp = fixed_points(W, body3)
    cands = []
    if fp.identically_zero:
        cands = list(np.eye(3)) + list(fibonacci_sphere(n_extra))
    else:
        cands = list(fp.directions)
        rng = np.random.default_rng(seed)
        for s0 in rng.standard_normal((n_orbits, 3)):
            try:
                orb = orbit_classify(W, body3, s0, T=T, dt=dt)
            except SectionLabError:
                continue
            if orb.kind == "ConvergesToFixed" and orb.trajectory is not None:
                st = orb.trajectory.states
                cands += list(st[np.linspace(0, len(st) - 1, 5).astype(int)])
    cands = np.array([c / np.linalg.norm(c) for c in cands])
    res = np.full(len(cands), np.inf)
    for k, s in enumerate(cands):
        try:
            res[k] = fit_ellipse(_plane_section(body3, s))[1]
        except IndefiniteFit:
            pass
    members = res <= gate
    indep = bool(members.sum() >= 3
                 and np.linalg.svd(cands[members], compute_uv=False)[2] > 1e-3)
    return EllipticSections(cands, res, members, indep, fp.identically_zero, len(fp), gate)


def _independent_triple(dirs: np.ndarray) -> np.ndarray:
    """Three rows of ``dirs`` that are as independent as possible (greedy)."""
    pick = [0]
    for _ in range(2):
        q, _ = np.linalg.qr(dirs[pick].T)
        rest = dirs - (dirs @ q) @ q.T
        pick.append(int(np.argmax(np.linalg.norm(rest, axis=1))))
    return dirs[pick]


def sections_from_bivectors(body3: ConvexBody, sigmas) -> tuple[list, np.ndarray]:
    """Planes with normals ``sigma_k`` and boundary points on their pairwise lines.

    Returns the three sections (with embedding columns ``e_a, e_b``) and the
    basis ``E = [e_1 e_2 e_3]``, where ``e_k`` spans the line
    ``Pi_{k+1} cap Pi_{k+2}`` and lies on the boundary of ``body3``.
    """
    s = np.asarray(sigmas, dtype=float)
    e = np.array([np.cross(s[(k + 1) % 3], s[(k + 2) % 3]) for k in range(3)])
    e = e / body3.norm(e)[:, None]
    pairs = [(1, 2), (2, 0), (0, 1)]
    secs = [SectionBody(body3, np.column_stack([e[a], e[b]])) for a, b in pairs]
    return secs, e.T


@dataclass
class SectionForm:
    """Quadratic form assembled from three elliptic sections.

    ``q_basis`` is the form in the basis of the shared boundary points and
    ``q`` the same form in ambient coordinates (when the sections live in
    R^3); ``consistency`` is the worst deviation of the fitted diagonal
    entries from 1, and ``fit_residuals`` the three ellipse residuals.
    """

    q_basis: np.ndarray
    q: Optional[np.ndarray]
    consistency: float
    fit_residuals: np.ndarray


def q_from_three_sections(sections: list, gate: float = 1e-5, tol: float = 1e-6,
                          grid=720) -> SectionForm:
    """Quadratic form from three planar sections through shared boundary points.

    Parameters
    ----------
    sections : list of SectionBody
        Each embedding has two columns among three boundary points
        ``e_1, e_2, e_3`` of a common parent; every point appears twice.
    gate : float
        Ellipse fit gate.
    tol : float
        Cross-plane consistency gate.

    Raises
    ------
    NotElliptic
        If a section fails the ellipse fit gate.
    IncompatibleSections
        If the diagonal entries read from the sections disagree with 1.
    """
    cols = []
    idx = []
    for sec in sections:
        pair = []
        for c in sec.embedding.T:
            for j, e in enumerate(cols):
                if np.allclose(c, e, atol=1e-12) or np.allclose(c, -e, atol=1e-12):
                    pair.append((j, 1.0 if np.allclose(c, e, atol=1e-12) else -1.0))
                    break
            else:
                cols.append(c)
                pair.append((len(cols) - 1, 1.0))
        idx.append(pair)
    if len(cols) != 3:
        raise IncompatibleSections("sections must share exactly three basis points")
    q = np.zeros((3, 3))
    diag = []
    fits = []
    for sec, ((a, sa), (b, sb)) in zip(sections, idx):
        try:
            qs, r = fit_ellipse(sec, grid)
        except IndefiniteFit as exc:
            raise NotElliptic(str(exc)) from exc
        fits.append(r)
        if r > gate:
            raise NotElliptic(f"section fit residual {r:.3e} exceeds gate {gate:.1e}")
        diag += [qs[0, 0], qs[1, 1]]
        q[a, b] = q[b, a] = sa * sb * qs[0, 1]
    np.fill_diagonal(q, 1.0)
    cons = float(np.max(np.abs(np.array(diag) - 1.0)))
    if cons > tol:
        raise IncompatibleSections(f"diagonal entries disagree by {cons:.3e}")
    e = np.column_stack(cols)
    amb = None
    if e.shape[0] == 3:
        ei = np.linalg.inv(e)
        amb = ei.T @ q @ ei
        amb = 0.5 * (amb + amb.T)
    return SectionForm(q, amb, cons, np.array(fits))


# --------------------------------------------------------------------------
# projectors

def _covector(x_basis: np.ndarray) -> np.ndarray:
    u, _, _ = np.linalg.svd(x_basis)
    f = u[:, -1]
    return f


def min_norm_projector(body: ConvexBody, x_basis, n_starts: int = 4, grid=None,
                       seed: int = 0, loewner=None) -> tuple[np.ndarray, float]:
    """Projector onto a hyperplane X of least operator norm.

    Projectors are ``P x = x - f(x) d`` with ``f`` the unit normal covector
    of X and ``f(d) = 1``; ``d = f + B c`` with ``B`` an orthonormal basis of
    X.  The norm ``max Psi(P x) / Psi(x)`` over sampled directions (including
    the coordinate axes) is minimized by Nelder-Mead from the normal
    direction, the Loewner-orthogonal direction and seeded random starts.
    Pass ``loewner`` (the body's Loewner form) to skip recomputing it.

    Returns
    -------
    P : ndarray
    norm : float
    """
    xb = np.asarray(x_basis, dtype=float)
    d = body.dim
    f = _covector(xb)
    q_b, _ = np.linalg.qr(xb)
    if grid is None:
        n = {2: 720, 3: 2048}.get(d, 4096)
        x = np.vstack([sphere_grid(d, n, seed), np.eye(d), -np.eye(d)])
    else:
        x = np.asarray(grid, float)
    x = np.vstack([x, sphere_grid(d - 1, 64) @ q_b.T]) if d - 1 in (2, 3) else x
    px = body.norm(x)
    fx = x @ f

    def norm_of(c):
        dd = f + q_b @ c
        return float(np.max(body.norm(x - np.outer(fx, dd)) / px))

    ql = loewner_ellipsoid(body) if loewner is None else np.asarray(loewner)
    dl = np.linalg.solve(ql, f)
    dl = dl / (f @ dl)
    rng = np.random.default_rng(seed)
    starts = [q_b.T @ (dl - f), np.zeros(d - 1)]
    starts += [0.3 * rng.standard_normal(d - 1) for _ in range(max(0, n_starts - 2))]
    best_c, best = None, np.inf
    for c0 in starts:
        # every projector has norm >= 1, so reaching 1 ends the search
        if best <= 1.0 + 1e-12:
            break
        v0 = norm_of(c0)
        if v0 < best:
            best_c, best = c0, v0
        if v0 <= 1.0 + 1e-12:
            continue
        res = minimize(norm_of, c0, method="Nelder-Mead",
                       options={"xatol": 1e-9, "fatol": 1e-12, "maxiter": 4000})
        if res.fun < best:
            best_c, best = res.x, float(res.fun)
    dd = f + q_b @ best_c
    return np.eye(d) - np.outer(dd, f), best


# --------------------------------------------------------------------------
# degenerate tensors

@dataclass
class DegenerateOutcome:
    """Result of the degenerate-case analysis.

    ``kind`` is ``"Trivial"`` (R = 0), ``"Case2"`` (fully degenerate with
    ``R_lam = C_lam L``), ``"Contradiction"`` (a nonzero constant x quadratic
    or quadratic x vector factorization), or ``"PartlyDegenerate"`` (the
    pencil construction through a degenerate point).
    """

    kind: str
    label: str = ""
    L: Optional[np.ndarray] = None
    C: Optional[np.ndarray] = None
    Q: Optional[np.ndarray] = None
    residuals: dict = field(default_factory=dict)
    factorization: object = field(default=None, repr=False)


def _tangency_of_linear(K: ConvexBody, L: np.ndarray) -> float:
    x = boundary_points(K, default_grid(K.dim))
    v = x @ L.T
    r = np.abs(dir_deriv(K, x, v))
    if K.gradient is None:
        r = np.maximum(r, np.abs(dir_deriv(K, x, -v)))
    return float(np.max(r))


def classify_degenerate(K: ConvexBody, R: TensorR, gate: float = 1e-5, n_pencil: int = 64,
                        tol: float = 1e-6, zero_tol: float = 1e-12) -> DegenerateOutcome:
    """Analyse a tensor with degenerate points on the body ``K`` (in R^3).

    Raises
    ------
    Inconsistent
        If R has no degenerate point, or a fully degenerate R does not factor
        as a rank-one matrix.
    """
    if R.norm <= zero_tol:
        return DegenerateOutcome("Trivial", "R=0")
    ds = degenerate_set_sample(R, tol=tol)
    if ds.kind == "empty":
        raise Inconsistent("tensor has no degenerate points")
    if ds.kind == "everything":
        (v1, v2, v3), _ = v_triple(R)
        fac = rank1_factorize(v1, v2, v3)
        if fac.case == "LinearTimesLinear":
            L = fac.factors["L"]
            C = np.einsum("ijk,jk->i", R.coeffs, L) / np.sum(L * L)
            rec = float(np.max(np.abs(R.coeffs - C[:, None, None] * L[None])))
            tang = _tangency_of_linear(K, L)
            return DegenerateOutcome("Case2", "LinearTimesLinear", L=L, C=C,
                                     residuals={"factor": fac.residual, "R_equals_CL": rec,
                                                "L_tangency": tang},
                                     factorization=fac)
        if fac.case in ("ConstantTimesQuadratic", "QuadraticTimesVector"):
            return DegenerateOutcome("Contradiction", fac.case,
                                     residuals={"factor": fac.residual}, factorization=fac)
        raise Inconsistent(f"fully degenerate tensor without rank-one factorization "
                           f"(minor norm {fac.minor_norm:.3e})")
    return _partly_degenerate(K, R, ds, gate, n_pencil, tol)


def _partly_degenerate(K, R, ds, gate, n_pencil, tol) -> DegenerateOutcome:
    p0 = ds.points[-1] / np.linalg.norm(ds.points[-1])
    p_hat = p0 / float(K.norm(p0))
    a, b = tangent_frame(p0)
    tangents, fits, w_at_p0, lin_dev = [], [], 0.0, 0.0
    used = 0
    for th in np.pi * np.arange(n_pencil) / n_pencil:
        q = np.cos(th) * a + np.sin(th) * b
        probe = [q, (q + p0) / np.sqrt(2), (q - p0) / np.sqrt(2)]
        if all(t_r_dim(R, s, tol).dim < 2 for s in probe):
            continue                      # plane inside the degenerate set
        if t_r_dim(R, q, tol).dim < 2:
            continue
        used += 1
        W = planar_cubic_field(R, np.column_stack([p0, q]), tol)
        w_at_p0 = max(w_at_p0, float(np.max(np.abs(W(np.array([1.0, 0.0]))))))
        sec = SectionBody(K, np.column_stack([p_hat, q]))
        try:
            qs, r = fit_ellipse(sec)
        except IndefiniteFit:
            r, qs = np.inf, None
        fits.append(r)
        if qs is None:
            continue
        # tangent of the ellipse at (1, 0): direction Q-conjugate to e_1
        t2 = np.array([-qs[0, 1], qs[0, 0]])
        tangents.append(t2[0] * p_hat + t2[1] * q)
        red, _ = reduce_planar_field(W)
        if red.degree == 1:
            s = invariant_form(red.coeffs)
            if s is not None:
                # compare in the (p0, q) coordinates of W with the fitted form
                scale = np.diag([float(K.norm(p0)), 1.0])
                qw = scale @ qs @ scale
                lin_dev = max(lin_dev, float(np.max(np.abs(s / np.trace(s) - qw / np.trace(qw)))))
    if not fits:
        raise Inconsistent("no usable plane in the pencil")
    fit_res = float(np.max(fits))
    if fit_res > gate:
        return DegenerateOutcome("PartlyDegenerate", "nonelliptic pencil",
                                 residuals={"pencil_fit": fit_res, "W_at_p0": w_at_p0})
    u, s, vt = np.linalg.svd(np.array(tangents))
    h = vt[:2].T
    qh, r_h = fit_ellipse(SectionBody(K, h))
    basis = np.column_stack([h, p_hat])
    qb = np.zeros((3, 3))
    qb[:2, :2] = qh
    qb[2, 2] = 1.0
    bi = np.linalg.inv(basis)
    Q = bi.T @ qb @ bi
    Q = 0.5 * (Q + Q.T)
    return DegenerateOutcome("PartlyDegenerate", "ellipsoid", Q=Q,
                             residuals={"pencil_fit": fit_res, "horizontal_fit": r_h,
                                        "tangent_plane_rank3": float(s[2]) if len(s) > 2 else 0.0,
                                        "W_at_p0": w_at_p0, "planar_field_form": lin_dev,
                                        "psi_equals_q": psi_equals_q(K, Q),
                                        "planes_used": used})


# --------------------------------------------------------------------------
# the 4D certificate

def jsonable(v):
    """Convert numpy containers to plain JSON values; non-finite floats become None."""
    if isinstance(v, (np.floating, float)):
        v = float(v)
        return v if math.isfinite(v) else None
    if isinstance(v, (np.integer,)):
        return int(v)
    if isinstance(v, np.bool_):
        return bool(v)
    if isinstance(v, np.ndarray):
        return [jsonable(x) for x in v.tolist()]
    if isinstance(v, dict):
        return {str(k): jsonable(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [jsonable(x) for x in v]
    return v


@dataclass
class CertifyConfig:
    """Gates, grids and seeds of :func:`certify_ellipsoid_4d`."""

    x_basis: Optional[list] = None
    h: float = 1e-3
    t_seq: tuple = (1e-2, 5e-3, 2.5e-3)
    gate_symmetry: float = 1e-8
    gate_nu: float = 1e-5
    gate_equivalence: float = 1e-4
    gate_tensor: float = 1e-5
    gate_route: float = 1e-4
    gate_ellipse: float = 1e-5
    gate_consistency: float = 1e-6
    gate_psi_q: float = 1e-5
    gate_cylinder: float = 1e-5
    gate_kakutani: float = 1e-4
    r_zero: float = 1e-5
    n_kakutani: int = 100
    n_pencil: int = 64
    n_tilt_random: int = 3
    tilt_scale: float = 1.0
    quad: tuple = (48, 96)
    seed: int = 0
    jobs: int = 1

    def gates(self) -> dict:
        return {k[5:]: v for k, v in asdict(self).items() if k.startswith("gate_")}


@dataclass
class Stage:
    name: str
    residual: float
    gate: float
    passed: bool
    note: str = ""


@dataclass
class Certificate:
    """Outcome of the pipeline; ``status`` is decided by the first failing stage."""

    status: str
    stages: list
    recovered_Q: Optional[np.ndarray] = None
    label: str = ""
    provenance: dict = field(default_factory=dict)
    details: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        status = self.status
        if status == "DEGENERATE_CASE" and self.label:
            status = f"{status}({self.label})"
        return jsonable({
            "schema_version": 1,
            "status": status,
            "stages": [{"name": s.name, "residual": float(s.residual), "gate": float(s.gate),
                        "pass": bool(s.passed), "note": s.note} for s in self.stages],
            "recovered_Q": None if self.recovered_Q is None
            else np.asarray(self.recovered_Q).ravel().tolist(),
            "provenance": self.provenance,
            "details": self.details,
        })

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)


def _k_form(K, R, cfg, details) -> tuple[Optional[np.ndarray], list, Optional[str]]:
    """Quadratic form of the section K from the degeneracy branch.

    Returns the form (or None), the stage records, and a failure status.
    """
    stages = []
    rz = R.norm < cfg.r_zero
    r_used = TensorR(np.zeros((3, 3, 3))) if rz else R
    branch = "zero"
    if not rz:
        ds = degenerate_set_sample(r_used)
        branch = "nondegenerate" if ds.kind == "empty" else f"degenerate-{ds.kind}"
    details["branch"] = branch
    if branch == "degenerate-proper":
        out = classify_degenerate(K, r_used, cfg.gate_ellipse, cfg.n_pencil)
        details["degenerate"] = {"kind": out.kind, "label": out.label, **out.residuals}
        if out.Q is None:
            stages.append(Stage("degeneracy", out.residuals.get("pencil_fit", np.inf),
                                cfg.gate_ellipse, False, out.label))
            return None, stages, "DEGENERATE_CASE"
        stages.append(Stage("degeneracy", out.residuals["pencil_fit"], cfg.gate_ellipse, True,
                            out.kind))
        return out.Q, stages, None
    if branch == "degenerate-everything":
        out = classify_degenerate(K, r_used, cfg.gate_ellipse, cfg.n_pencil)
        details["degenerate"] = {"kind": out.kind, "label": out.label, **out.residuals}
        if out.kind != "Case2":
            stages.append(Stage("degeneracy", np.inf, 0.0, False, out.label))
            return None, stages, "DEGENERATE_CASE"
        resid = max(out.residuals["R_equals_CL"], out.residuals["L_tangency"])
        ok = resid <= cfg.gate_tensor
        stages.append(Stage("degeneracy", resid, cfg.gate_tensor, ok, "Case2"))
        if not ok:
            return None, stages, "DEGENERATE_CASE"
    es = elliptic_sections(K, r_used, cfg.gate_ellipse, seed=cfg.seed)
    details["elliptic_sections"] = {"candidates": int(len(es.directions)),
                                    "members": int(es.members.sum()),
                                    "independent": es.independent,
                                    "identically_zero": es.identically_zero}
    if not es.independent:
        best = float(np.min(es.residuals)) if len(es.residuals) else np.inf
        stages.append(Stage("elliptic_sections", best, cfg.gate_ellipse, False,
                            "fewer than three independent elliptic sections"))
        return None, stages, "INCONCLUSIVE"
    triple = _independent_triple(es.elliptic)
    secs, _ = sections_from_bivectors(K, triple)
    try:
        sf = q_from_three_sections(secs, cfg.gate_ellipse, cfg.gate_consistency)
    except NotElliptic as exc:
        stages.append(Stage("elliptic_sections", np.inf, cfg.gate_ellipse, False, str(exc)))
        return None, stages, "INCONCLUSIVE"
    except IncompatibleSections as exc:
        stages.append(Stage("elliptic_sections", float(np.max(es.residuals[es.members])),
                            cfg.gate_ellipse, True))
        stages.append(Stage("section_consistency", np.inf, cfg.gate_consistency, False, str(exc)))
        return None, stages, "INCONCLUSIVE"
    stages.append(Stage("elliptic_sections", float(np.max(sf.fit_residuals)), cfg.gate_ellipse,
                        True))
    stages.append(Stage("section_consistency", sf.consistency, cfg.gate_consistency, True))
    return sf.q, stages, None


def certify_ellipsoid_4d(body4: ConvexBody, config: Optional[CertifyConfig] = None) -> Certificate:
    """Run the full pipeline on a symmetric body in R^4.

    Stages, in order: ``symmetry``, ``nu``, ``tilt_probe``,
    ``tensor_smooth``, ``tensor_orbit``, ``route_agreement``,
    ``tensor_verify``, the degeneracy branch (``degeneracy`` and/or
    ``elliptic_sections``, ``section_consistency``), ``psi_equals_q`` on K,
    ``nu_tangency``, ``cylinder``, ``kakutani`` and ``quadric_fit``.  The
    status is ``ELLIPSOID`` only if every stage passes; otherwise it is the
    status attached to the first failing stage.  The Kakutani stage samples
    hyperplanes, so it is evidence rather than proof.
    """
    cfg = config or CertifyConfig()
    xb = coordinate_hyperplane(4) if cfg.x_basis is None else np.asarray(cfg.x_basis, float)
    stages: list = []
    details: dict = {}
    prov = {"gates": cfg.gates(), "h": cfg.h, "t_seq": list(cfg.t_seq), "seed": cfg.seed,
            "quadrature": list(cfg.quad), "n_kakutani": cfg.n_kakutani,
            "n_pencil": cfg.n_pencil, "x_basis": xb.tolist(),
            "kakutani_note": "sampled hyperplanes: numerical evidence, not a proof"}

    def done(status, label="", q=None):
        return Certificate(status, stages, q, label, prov, details)

    def add(name, residual, gate, note=""):
        ok = bool(np.isfinite(residual) and residual <= gate)
        stages.append(Stage(name, float(residual), float(gate), ok, note))
        return ok

    if not add("symmetry", symmetry_check(body4), cfg.gate_symmetry):
        return done("INCONCLUSIVE")
    try:
        nu, info = choose_nu(body4, xb, cfg.h, cfg.quad, return_info=True)
    except SectionLabError as exc:
        add("nu", np.inf, cfg.gate_nu, str(exc))
        return done("INCONCLUSIVE")
    if not add("nu", nu_kernel_residual(body4, nu, xb, cfg.h, cfg.quad), cfg.gate_nu):
        return done("INCONCLUSIVE")
    details["nu"] = nu

    K = SectionBody(body4, xb)
    algebra = self_equivalence_algebra(K)
    probe = tilt_probe(body4, xb, nu, cfg.gate_equivalence, cfg.n_tilt_random,
                       cfg.tilt_scale, cfg.seed, algebra=algebra)
    details["tilt_probe"] = {"covectors": probe.covectors, "residuals": probe.residuals}
    if not add("tilt_probe", probe.worst, cfg.gate_equivalence):
        return done("NOT_MONOCHROMATIC")

    p = invariant_inner_product(K, algebra=algebra, seed=cfg.seed)
    try:
        rs = build_r_smooth(body4, xb, nu, cfg.h, cfg.gate_equivalence, p, algebra, cfg.seed)
    except EquivalenceFailed as exc:
        add("tensor_smooth", exc.residual, cfg.gate_equivalence, "equivalence failed")
        return done("NOT_MONOCHROMATIC")
    add("tensor_smooth", rs.info["equivalence_residual"], cfg.gate_equivalence)
    try:
        ro = build_r_orbit(body4, xb, nu, cfg.t_seq, cfg.gate_equivalence, p, algebra, cfg.seed)
    except EquivalenceFailed as exc:
        add("tensor_orbit", exc.residual, cfg.gate_equivalence, "equivalence failed")
        return done("NOT_MONOCHROMATIC")
    except CDegenerate as exc:
        add("tensor_orbit", np.inf, cfg.gate_equivalence, str(exc))
        return done("INCONCLUSIVE")
    add("tensor_orbit", ro.info["equivalence_residual"], cfg.gate_equivalence)
    details["R_smooth_norm"] = rs.norm
    details["R_orbit_norm"] = ro.norm
    details["C"] = ro.info["C"]
    if not add("route_agreement", (rs - ro).norm, cfg.gate_route):
        return done("INCONCLUSIVE")
    rep = verify_r(body4, xb, rs.nu, rs, p=p, algebra=algebra)
    details["tensor_verify"] = rep.as_dict()
    if not add("tensor_verify", max(rep.trace_residual, rep.tangency_residual,
                                    rep.orthogonality_residual), cfg.gate_tensor):
        return done("NOT_MONOCHROMATIC")
    nu = rs.nu / np.linalg.norm(rs.nu)

    try:
        qk, st, fail = _k_form(K, rs, cfg, details)
    except SectionLabError as exc:
        add("degeneracy", np.inf, 0.0, str(exc))
        return done("INCONCLUSIVE")
    stages.extend(st)
    if fail is not None:
        return done(fail, details.get("degenerate", {}).get("label", ""))
    details["Q_section"] = qk
    if not add("psi_equals_q", psi_equals_q(K, qk), cfg.gate_psi_q):
        return done("INCONCLUSIVE")

    y = boundary_points(K, default_grid(3))
    x = y @ xb.T
    tang = np.abs(dir_deriv(body4, x, np.broadcast_to(nu, x.shape)))
    if not add("nu_tangency", float(np.max(tang)), cfg.gate_cylinder):
        return done("INCONCLUSIVE")
    z = boundary_points(body4, sphere_grid(4, 4096, cfg.seed))
    coords = np.linalg.solve(np.column_stack([xb, nu]), z.T).T
    cyl = float(max(0.0, np.max(K.norm(coords[:, :3])) - 1.0))
    if not add("cylinder", cyl, cfg.gate_cylinder):
        return done("INCONCLUSIVE")

    rng = np.random.default_rng(cfg.seed)
    normals = list(np.eye(4)) + list(rng.standard_normal((cfg.n_kakutani, 4)))
    ql4 = loewner_ellipsoid(body4)

    def excess(n):
        u, _, _ = np.linalg.svd(n[:, None])
        return min_norm_projector(body4, u[:, 1:], seed=cfg.seed, loewner=ql4)[1] - 1.0

    with ThreadPoolExecutor(max_workers=max(1, cfg.jobs)) as pool:
        worst = max(0.0, *pool.map(excess, normals))
    details["kakutani_hyperplanes"] = len(normals)
    if not add("kakutani", worst, cfg.gate_kakutani, "sampled hyperplanes"):
        return done("INCONCLUSIVE")

    q4, fit = fit_quadric(boundary_points(body4, sphere_grid(4, 4096, cfg.seed)))
    restr = float(np.max(np.abs(xb.T @ q4 @ xb - qk)))
    if not add("quadric_fit", max(fit, restr), cfg.gate_psi_q):
        return done("INCONCLUSIVE")
    return done("ELLIPSOID", q=0.5 * (q4 + q4.T))
