"""Trajectories of polynomial fields and the plane flow on bivectors.

The plane flow of a tensor R moves a 2-plane ``u ^ v`` by
``R_{phi(sigma)}(u) ^ v + u ^ R_{phi(sigma)}(v)``, a quadratic field ``W`` on
``Lambda^2 X = R^3``.  Its trajectories stay on the boundary of the
intersection body, its zeros are candidate elliptic sections, and the index
count of isolated zeros on that sphere-like surface is 2.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional, Union

import numpy as np
from scipy.linalg import expm
from scipy.optimize import least_squares
from scipy.spatial import cKDTree

from .algebra import PolyVectorField, divide_by_linear_form, linear_field, linear_form, poly_cross
from .body import ConvexBody, boundary_points
from .equivalence import default_grid
from .errors import Blowup, Inconclusive, ZeroOnCircle
from .grids import fibonacci_sphere, tangent_frame
from .sections import IntersectionBodySample, area_A, area_A_many
from .tensor import TensorR

__all__ = [
    "Trajectory", "integrate", "one_param_group_check", "plane_flow_field",
    "plane_flow_direct", "representation_error", "frame_flow", "FrameFlowResult",
    "FixedPoints", "fixed_points", "OrbitResult", "orbit_classify", "index_at",
    "winding_number", "PlaneFlowRecord",
]

Field = Union[PolyVectorField, Callable]


@dataclass
class Trajectory:
    """Sampled solution of ``x' = F(x)``."""

    times: np.ndarray
    states: np.ndarray
    invariant_drift: float = float("nan")

    def to_csv(self, path, drift=None) -> None:
        cols = [self.times, self.states]
        names = ["t"] + [f"x{i + 1}" for i in range(self.states.shape[1])]
        if drift is not None:
            cols.append(drift)
            names.append("drift")
        np.savetxt(path, np.column_stack(cols), delimiter=",", fmt="%.17g",
                   header=",".join(names), comments="")


def _rk4(f, x0, T, dt, every=1):
    n = int(round(T / dt))
    x = np.array(x0, dtype=float)
    ts, xs = [0.0], [x.copy()]
    for k in range(1, n + 1):
        k1 = f(x)
        k2 = f(x + 0.5 * dt * k1)
        k3 = f(x + 0.5 * dt * k2)
        k4 = f(x + dt * k3)
        x = x + dt / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)
        if not np.all(np.isfinite(x)) or np.max(np.abs(x)) > 1e6:
            raise Blowup(f"state left the box |x| <= 1e6 at t = {k * dt:.4g}")
        if k % every == 0 or k == n:
            ts.append(k * dt)
            xs.append(x.copy())
    return np.array(ts), np.array(xs)


def integrate(field: Field, x0, T: float, dt: float = 1e-3, body: Optional[ConvexBody] = None,
              every: int = 1) -> Trajectory:
    """Fixed-step classical Runge-Kutta integration of ``x' = field(x)``.

    Parameters
    ----------
    field : PolyVectorField or callable
    x0 : array_like
    T, dt : float
        Horizon and step (``dt <= 1e-2``).
    body : ConvexBody, optional
        If given, ``invariant_drift`` is ``max |Psi(x(t)) - Psi(x0)|``.
    every : int
        Keep every ``every``-th state.

    Raises
    ------
    Blowup
        If the state exceeds 1e6 in absolute value.
    """
    if dt > 1e-2 or dt <= 0:
        raise ValueError("dt must lie in (0, 1e-2]")
    ts, xs = _rk4(field, x0, T, dt, every)
    drift = float("nan")
    if body is not None:
        vals = body.norm(xs)
        drift = float(np.max(np.abs(vals - vals[0])))
    return Trajectory(ts, xs, drift)


def one_param_group_check(L, K: ConvexBody, t_grid=None, grid=None) -> float:
    """``max |Psi(exp(tL) x) - 1|`` over times and boundary samples of K."""
    t_grid = np.linspace(-np.pi, np.pi, 33) if t_grid is None else np.asarray(t_grid, float)
    x = boundary_points(K, default_grid(K.dim) if grid is None else grid)
    worst = 0.0
    for t in t_grid:
        worst = max(worst, float(np.max(np.abs(K.norm(x @ expm(t * np.asarray(L)).T) - 1.0))))
    return worst


# --------------------------------------------------------------------------
# plane flow

_MU = np.array([[0.0, 0.0, 1.0], [0.0, 0.0, 0.0], [-1.0, 0.0, 0.0]])   # u = (z, 0, -x)
_MV = np.array([[0.0, 0.0, 0.0], [0.0, 0.0, 1.0], [0.0, -1.0, 0.0]])   # v = (0, z, -y)


def _r_phi_of(R: TensorR, m: np.ndarray) -> PolyVectorField:
    """Quadratic field ``sigma -> R_{phi(sigma)}(M sigma)``."""
    out = None
    for i in range(3):
        term = linear_form(np.eye(3)[i]) * linear_field(R.coeffs[i] @ m)
        out = term if out is None else out + term
    return out


def plane_flow_field(R: TensorR) -> PolyVectorField:
    """Quadratic field ``W`` on bivectors (Hodge coordinates) induced by R.

    With ``u = (z, 0, -x)`` and ``v = (0, z, -y)`` one has ``u ^ v = z sigma``,
    so ``R(u) ^ v + u ^ R(v)`` is the cubic ``z W(sigma)``; the quotient by
    ``z`` is exact.
    """
    u, v = linear_field(_MU), linear_field(_MV)
    cubic = poly_cross(_r_phi_of(R, _MU), v) + poly_cross(u, _r_phi_of(R, _MV))
    return divide_by_linear_form(cubic, np.array([0.0, 0.0, 1.0]), tol=1e-12)


def plane_flow_direct(R: TensorR, sigma) -> np.ndarray:
    """``W(sigma)`` from an explicit pair ``u, v`` spanning the plane of ``sigma``."""
    s = np.asarray(sigma, dtype=float)
    n = np.linalg.norm(s)
    if n == 0:
        return np.zeros(3)
    u, v = tangent_frame(s)
    v = n * v
    m = R(s)
    return np.cross(m @ u, v) + np.cross(u, m @ v)


def representation_error(R: TensorR, W: Optional[PolyVectorField] = None, n: int = 100,
                         seed: int = 0) -> float:
    """Largest difference between the polynomial and direct evaluations of ``W``."""
    W = plane_flow_field(R) if W is None else W
    s = np.random.default_rng(seed).standard_normal((n, 3))
    return float(max(np.max(np.abs(W(x) - plane_flow_direct(R, x))) for x in s))


@dataclass
class FrameFlowResult:
    u: Trajectory
    v: Trajectory
    psi_drift: float
    area_drift: float
    pairs: np.ndarray = field(repr=False, default=None)


def frame_flow(R: TensorR, u0, v0, T: float, dt: float = 1e-3,
               body: Optional[ConvexBody] = None, every: int = 10) -> FrameFlowResult:
    """Integrate ``u' = R_{phi(u^v)}(u)``, ``v' = R_{phi(u^v)}(v)``.

    When ``body`` (in R^3) is given, reports the drift of
    ``Psi(a u(t) + b v(t))`` over 16 fixed pairs ``(a, b)`` on the unit circle
    and of the section area function ``A(u(t) ^ v(t))`` at the kept samples.
    """
    u0 = np.asarray(u0, dtype=float)
    v0 = np.asarray(v0, dtype=float)
    if np.linalg.norm(np.cross(u0, v0)) < 1e-12:
        raise ValueError("u0 and v0 must be independent")
    c = R.coeffs

    def f(s):
        u, v = s[:3], s[3:]
        m = np.tensordot(np.cross(u, v), c, axes=(0, 0))
        return np.concatenate([m @ u, m @ v])

    ts, xs = _rk4(f, np.concatenate([u0, v0]), T, dt, every)
    th = np.pi * np.arange(16) / 16
    pairs = np.column_stack([np.cos(th), np.sin(th)])
    psi_d = a_d = float("nan")
    if body is not None:
        pts = pairs[None, :, 0:1] * xs[:, None, :3] + pairs[None, :, 1:2] * xs[:, None, 3:]
        vals = body.norm(pts)
        psi_d = float(np.max(np.abs(vals - vals[0])))
        sig = np.cross(xs[:, :3], xs[:, 3:])
        a = area_A_many(body, sig)
        a_d = float(np.max(np.abs(a - a[0])))
    return FrameFlowResult(Trajectory(ts, xs[:, :3]), Trajectory(ts, xs[:, 3:]), psi_d, a_d, pairs)


# --------------------------------------------------------------------------
# fixed points, orbits, indices

def _as_callable(W: Field):
    return W if callable(W) else (lambda x: W(x))


def _project(S, s: np.ndarray) -> np.ndarray:
    """Scale directions onto the surface: ``A = 1`` for intersection bodies, unit sphere if None."""
    s = np.atleast_2d(s)
    if S is None:
        return s / np.linalg.norm(s, axis=1, keepdims=True)
    if isinstance(S, IntersectionBodySample):
        return S.project(s)
    return s / area_A_many(S, s)[:, None]


@dataclass
class FixedPoints:
    """Zeros of a plane-flow field on the surface.

    ``points`` lie on the surface, ``directions`` are their unit vectors and
    ``residuals`` the values ``|W(direction)|``.  ``identically_zero`` marks a
    field with no isolated zeros because it vanishes everywhere.
    """

    points: np.ndarray
    directions: np.ndarray
    residuals: np.ndarray
    identically_zero: bool = False

    def __len__(self):
        return len(self.points)

    def __iter__(self):
        return iter(self.points)

    def to_csv(self, path) -> None:
        data = np.column_stack([self.points, self.directions, self.residuals])
        np.savetxt(path, data, delimiter=",", fmt="%.17g", comments="",
                   header="sigma1,sigma2,sigma3,dir1,dir2,dir3,residual")


def fixed_points(W: Field, S=None, tol: float = 1e-10, grid: int = 2048,
                 scan: float = 0.1) -> FixedPoints:
    """Isolated zeros of a homogeneous field, placed on the surface ``S``.

    Parameters
    ----------
    W : PolyVectorField or callable
        Field on R^3.
    S : IntersectionBodySample, ConvexBody or None
        Surface; the unit sphere if None, ``{A = 1}`` of the body otherwise.
        Homogeneity of ``W`` makes zeros radial, so the search runs on the
        unit sphere and the results are scaled radially.
    tol : float
        Acceptance threshold on ``|W|`` at refined unit directions, relative
        to the largest coefficient of a polynomial field.
    grid : int
        Number of scan directions.
    scan : float
        Grid local minima below ``scan`` times the grid maximum seed the
        Gauss-Newton refinement.
    """
    f = _as_callable(W)
    if isinstance(W, PolyVectorField):
        scale = W.max_abs_coeff()
        if scale == 0.0:
            return FixedPoints(np.zeros((0, 3)), np.zeros((0, 3)), np.zeros(0), True)
    else:
        scale = 1.0
    pts = fibonacci_sphere(grid)
    vals = np.linalg.norm(f(pts), axis=-1)
    if np.max(vals) <= tol * scale:
        return FixedPoints(np.zeros((0, 3)), np.zeros((0, 3)), np.zeros(0), True)
    tree = cKDTree(pts)
    _, nb = tree.query(pts, k=9)
    local = np.all(vals[:, None] <= vals[nb[:, 1:]], axis=1) & (vals < scan * vals.max())
    dirs, res = [], []
    for s0 in pts[local]:
        sol = least_squares(lambda s: np.append(f(s) / scale, s @ s - 1.0), s0, method="trf",
                            xtol=1e-15, ftol=1e-15, gtol=1e-15, max_nfev=200)
        s = sol.x / np.linalg.norm(sol.x)
        r = float(np.linalg.norm(f(s)))
        if r <= tol * scale and all(np.arccos(np.clip(s @ d, -1, 1)) > 1e-3 for d in dirs):
            dirs.append(s)
            res.append(r)
    dirs = np.array(dirs).reshape(-1, 3)
    return FixedPoints(_project(S, dirs) if len(dirs) else dirs, dirs, np.array(res))


@dataclass
class OrbitResult:
    """``kind`` is ``"ConvergesToFixed"``, ``"ClosedOrbit"`` or ``"Wandering"``."""

    kind: str
    period: Optional[float] = None
    endpoint: Optional[np.ndarray] = None
    trajectory: Optional[Trajectory] = field(default=None, repr=False)


def _hermite_crossing(f, g, x0, x1, dt):
    """State at the zero of ``g`` between two steps, by cubic Hermite interpolation."""
    d0, d1 = f(x0), f(x1)

    def h(s):
        h00, h10 = 2 * s ** 3 - 3 * s ** 2 + 1, s ** 3 - 2 * s ** 2 + s
        h01, h11 = -2 * s ** 3 + 3 * s ** 2, s ** 3 - s ** 2
        return h00 * x0 + h10 * dt * d0 + h01 * x1 + h11 * dt * d1

    a, b = 0.0, 1.0
    for _ in range(60):
        m = 0.5 * (a + b)
        if g(h(a)) * g(h(m)) <= 0:
            b = m
        else:
            a = m
    s = 0.5 * (a + b)
    return s, h(s)


def orbit_classify(W: Field, S, sigma0, T: float = 50.0, dt: float = 1e-3,
                   close_tol: float = 1e-6, fix_tol: float = 1e-8) -> OrbitResult:
    """Classify the forward orbit of ``sigma0`` under ``W``.

    Convergence is declared once ``|W|`` (relative to ``|W(sigma0)|`` scale
    of the field) falls below ``fix_tol``.  A closed orbit is declared when
    the orbit recrosses the plane through ``sigma0`` orthogonal to
    ``W(sigma0)`` in the same sense, no earlier than ``10 dt``, at a point
    within ``close_tol`` (relative) of ``sigma0``.  Crossings without closure
    give ``Wandering``.

    Raises
    ------
    Inconclusive
        If neither happens and no return crossing occurred before ``T``.
    """
    f = _as_callable(W)
    x0 = _project(S, np.asarray(sigma0, dtype=float))[0]
    w0 = f(x0)
    scale = W.max_abs_coeff() if isinstance(W, PolyVectorField) else 1.0
    if np.linalg.norm(w0) <= fix_tol * max(scale, 1e-300):
        return OrbitResult("ConvergesToFixed", endpoint=x0,
                           trajectory=Trajectory(np.array([0.0]), x0[None]))
    nrm = np.linalg.norm(x0)

    def g(x):
        return float(w0 @ (x - x0))

    n = int(round(T / dt))
    x = x0.copy()
    ts, xs = [0.0], [x0.copy()]
    crossed = False
    left = False
    for k in range(1, n + 1):
        k1 = f(x)
        k2 = f(x + 0.5 * dt * k1)
        k3 = f(x + 0.5 * dt * k2)
        k4 = f(x + dt * k3)
        xn = x + dt / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)
        if not np.all(np.isfinite(xn)) or np.max(np.abs(xn)) > 1e6:
            raise Blowup("orbit left the box |x| <= 1e6")
        t = k * dt
        if k % 10 == 0:
            ts.append(t)
            xs.append(xn.copy())
        if np.linalg.norm(xn - x0) > 100 * close_tol * nrm:
            left = True
        if left and t > 10 * dt and g(x) < 0 <= g(xn):
            crossed = True
            s, xc = _hermite_crossing(f, g, x, xn, dt)
            if np.linalg.norm(xc - x0) <= close_tol * nrm:
                tr = Trajectory(np.array(ts), np.array(xs))
                return OrbitResult("ClosedOrbit", period=(k - 1 + s) * dt, endpoint=xc,
                                   trajectory=tr)
        wn = np.linalg.norm(f(xn) if k % 10 == 0 else k4)
        if wn <= fix_tol * max(scale, 1e-300) * nrm ** 2 and k % 10 == 0:
            return OrbitResult("ConvergesToFixed", endpoint=xn,
                               trajectory=Trajectory(np.array(ts), np.array(xs)))
        x = xn
    tr = Trajectory(np.array(ts), np.array(xs))
    if crossed:
        return OrbitResult("Wandering", endpoint=x, trajectory=tr)
    raise Inconclusive(f"no return or convergence before T = {T}")


def winding_number(vectors: np.ndarray) -> int:
    """Winding number of a loop of planar vectors (rows, in order, closed or not)."""
    v = np.asarray(vectors, dtype=float)
    v = np.vstack([v, v[:1]])
    ang = np.unwrap(np.arctan2(v[:, 1], v[:, 0]))
    return int(np.round((ang[-1] - ang[0]) / (2 * np.pi)))


def index_at(W: Field, sigma_star, radius: float = 0.05, S=None, n: int = 720) -> int:
    """Index of an isolated zero by winding over a small circle.

    For a point in R^2 the circle lies in the plane.  For a point in R^3 the
    circle is geodesic on the unit sphere around ``sigma_star / |sigma_star|``
    and the field is projected to the sphere's tangent planes, which the
    radial projection identifies with the tangent planes of ``S``.

    Raises
    ------
    ZeroOnCircle
        If ``|W| < 1e-10`` at a sample of the circle.
    """
    f = _as_callable(W)
    p = np.asarray(sigma_star, dtype=float)
    th = 2 * np.pi * np.arange(n + 1) / n
    if p.size == 2:
        pts = p + radius * np.column_stack([np.cos(th), np.sin(th)])
        vec = np.array([f(q) for q in pts])
        if np.min(np.linalg.norm(vec, axis=1)) < 1e-10:
            raise ZeroOnCircle("field vanishes on the sampling circle")
        return winding_number(vec)
    c = p / np.linalg.norm(p)
    e1, e2 = tangent_frame(c)
    pts = (np.cos(radius) * c + np.sin(radius) * (np.outer(np.cos(th), e1)
                                                  + np.outer(np.sin(th), e2)))
    surf = _project(S, pts) if S is not None else pts
    vec = np.array([f(q) for q in surf])
    if np.min(np.linalg.norm(vec, axis=1)) < 1e-10:
        raise ZeroOnCircle("field vanishes on the sampling circle")
    tang = vec - np.sum(vec * pts, axis=1, keepdims=True) * pts
    return winding_number(np.column_stack([tang @ e1, tang @ e2]))


@dataclass
class PlaneFlowRecord:
    """Plane-flow field of a tensor with its zeros and orbit classifications."""

    W: PolyVectorField
    fixed: FixedPoints
    orbits: list = field(default_factory=list)
