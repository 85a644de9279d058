"""Direction grids on spheres and quadrature rules for radial integrals."""

from __future__ import annotations

from functools import lru_cache

import numpy as np


def circle_grid(n: int, phase: float = 0.0) -> np.ndarray:
    """Return ``n`` equally spaced unit vectors in the plane, shape ``(n, 2)``."""
    th = phase + 2.0 * np.pi * np.arange(n) / n
    return np.column_stack([np.cos(th), np.sin(th)])


def fibonacci_sphere(n: int) -> np.ndarray:
    """Return ``n`` nearly uniform unit vectors on S^2 (golden-angle spiral)."""
    i = np.arange(n) + 0.5
    z = 1.0 - 2.0 * i / n
    r = np.sqrt(np.maximum(0.0, 1.0 - z * z))
    phi = np.pi * (3.0 - np.sqrt(5.0)) * i
    return np.column_stack([r * np.cos(phi), r * np.sin(phi), z])


def sphere_grid(dim: int, n: int, seed: int = 0) -> np.ndarray:
    """Unit directions in R^dim.

    Deterministic for dim 2 and 3; for dim >= 4 a seeded Gaussian sample is
    used, with the coordinate axes (both signs) prepended.
    """
    if dim == 1:
        return np.array([[1.0], [-1.0]])
    if dim == 2:
        return circle_grid(n)
    if dim == 3:
        return fibonacci_sphere(n)
    rng = np.random.default_rng(seed)
    eye = np.eye(dim)
    g = rng.standard_normal((max(n - 2 * dim, 1), dim))
    g /= np.linalg.norm(g, axis=1, keepdims=True)
    return np.vstack([eye, -eye, g])


@lru_cache(maxsize=32)
def _sphere_rule(n_theta: int, n_phi: int):
    z, wz = np.polynomial.legendre.leggauss(n_theta)
    phi = 2.0 * np.pi * (np.arange(n_phi) + 0.5) / n_phi
    r = np.sqrt(1.0 - z * z)
    pts = np.stack([
        np.outer(r, np.cos(phi)),
        np.outer(r, np.sin(phi)),
        np.outer(z, np.ones(n_phi)),
    ], axis=-1).reshape(-1, 3)
    w = np.outer(wz, np.full(n_phi, 2.0 * np.pi / n_phi)).ravel()
    pts.setflags(write=False)
    w.setflags(write=False)
    return pts, w


def sphere_quadrature(n_theta: int = 48, n_phi: int = 96):
    """Gauss-Legendre (in z) times trapezoid (in azimuth) rule on S^2.

    Returns
    -------
    nodes : ndarray, shape (n_theta * n_phi, 3)
    weights : ndarray, summing to 4*pi
    """
    return _sphere_rule(int(n_theta), int(n_phi))


def tangent_frame(n: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Orthonormal ``u, v`` with ``u x v = n/|n|`` for each row of ``n``.

    Works on a single vector or a stack of shape ``(m, 3)``.
    """
    n = np.asarray(n, dtype=float)
    single = n.ndim == 1
    n = np.atleast_2d(n)
    nh = n / np.linalg.norm(n, axis=1, keepdims=True)
    k = np.argmin(np.abs(nh), axis=1)
    a = np.zeros_like(nh)
    a[np.arange(len(nh)), k] = 1.0
    u = a - np.sum(a * nh, axis=1, keepdims=True) * nh
    u /= np.linalg.norm(u, axis=1, keepdims=True)
    v = np.cross(nh, u)
    if single:
        return u[0], v[0]
    return u, v
