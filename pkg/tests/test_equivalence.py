import numpy as np
import pytest

from sectionlab.body import boundary_points, ellipsoid_body, lp_body
from sectionlab.equivalence import (
    default_grid, find_equivalence, invariant_inner_product, linear_equivalence,
    loewner_ellipsoid, self_equivalence_algebra,
)
from sectionlab.sections import cross_section
from oracles import mahler_volume, mvee_multiplicative

DISK = ellipsoid_body(np.eye(2))
SQUARE = lp_body(np.inf, (1.0, 1.0))
Q_ELL = np.array([[1.0, 0.3], [0.3, 0.5]])


def _image(body, f):
    """Body F(K): gauge y -> Psi(F^-1 y)."""
    finv = np.linalg.inv(f)
    return type(body)(body.dim, lambda y: body.norm(y @ finv.T),
                      None if body.gradient is None else (lambda y: body.grad(y @ finv.T) @ finv),
                      body.symmetric, "image")


def test_loewner_disk():
    assert np.allclose(loewner_ellipsoid(DISK), np.eye(2), atol=1e-8)


def test_loewner_ellipse_is_itself():
    assert np.allclose(loewner_ellipsoid(ellipsoid_body(Q_ELL)), Q_ELL, atol=1e-6)


def test_loewner_square():
    assert np.allclose(loewner_ellipsoid(SQUARE), np.eye(2) / 2, atol=1e-8)


@pytest.mark.parametrize("body", [
    cross_section(lp_body(4, (1, 1, 1)), np.array([[1.0, 0], [0, 1], [0.4, -0.3]])),
    lp_body(4, (1.0, 2.0, 0.5)),
    lp_body(1, (1.0, 1.0, 1.0)),
])
def test_loewner_matches_multiplicative_oracle(body):
    grid = default_grid(body.dim)
    x = boundary_points(body, grid)
    q = loewner_ellipsoid(body, grid=grid, tol=1e-10)
    ref = mvee_multiplicative(x, tol=1e-5)
    assert np.einsum("ni,ij,nj->n", x, q, x).max() <= 1 + 1e-9
    # the oracle stops at a dual gap of 1e-5, which bounds its log-volume excess by d * 1e-5
    assert np.log(np.linalg.det(q)) >= np.log(np.linalg.det(ref)) - body.dim * 1e-5
    assert np.allclose(q, ref, atol=1e-2 * np.abs(ref).max())


def test_equivalence_disk_to_stretched_disk():
    f = np.diag([2.0, 1.0])
    res = linear_equivalence(DISK, _image(DISK, f), tol=1e-6)
    assert res is not None and res.residual < 1e-6
    # F = diag(2, 1) R  <=>  F F^T = diag(4, 1)
    assert np.allclose(res.map @ res.map.T, f @ f.T, atol=1e-6)


def test_equivalence_disk_vs_square_none():
    assert linear_equivalence(DISK, SQUARE, tol=1e-3) is None
    res = find_equivalence(DISK, SQUARE)
    assert res.residual > 0.1


def test_self_equivalence_residual():
    body = lp_body(4, (1.0, 2.0))
    res = linear_equivalence(body, body, tol=1e-10)
    assert res is not None and res.residual < 1e-10
    # a symmetry of the l4 ellipse is a signed permutation up to the scales
    a = np.diag([1.0, 0.5]) @ res.map @ np.diag([1.0, 2.0])
    assert np.allclose(np.abs(a), np.round(np.abs(a)), atol=1e-6)


def test_equivalence_3d_random_map():
    rng = np.random.default_rng(3)
    k1 = lp_body(4, (1.0, 1.0, 1.0))
    f = rng.standard_normal((3, 3)) + 2 * np.eye(3)
    res = find_equivalence(k1, _image(k1, f), tol=1e-4)
    assert res.residual < 1e-6
    # F^-1 G is a symmetry of the cube-like l4 ball: a signed permutation
    p = np.linalg.solve(f, res.map)
    assert np.allclose(np.abs(p), np.round(np.abs(p)), atol=1e-5)


def test_inequivalent_l4_sections_by_invariant():
    # the sup-mismatch search and the Mahler volume are independent routes
    l4 = lp_body(4, (1, 1, 1, 1))
    e = np.eye(4)
    flat = cross_section(l4, e[:, :3])
    tilted = cross_section(l4, e[:, :3] + np.outer(e[3], [0.5, 0.5, 0.5]))
    m1 = mahler_volume(flat.norm)
    m2 = mahler_volume(tilted.norm)
    assert abs(m1 - m2) > 1e-3 * m1
    assert find_equivalence(flat, tilted, tol=1e-4).residual > 1e-2


@pytest.mark.parametrize("body, dim", [
    (DISK, 1),
    (ellipsoid_body(np.eye(3)), 3),
    (lp_body(4, (1, 1)), 0),
    (ellipsoid_body(Q_ELL), 1),
])
def test_symmetry_algebra_dimension(body, dim):
    alg = self_equivalence_algebra(body)
    assert alg.dim == dim
    x = boundary_points(body, default_grid(body.dim))
    for a in alg.basis:
        assert np.abs(np.einsum("ni,ij,nj->n", body.grad(x), a, x)).max() < 1e-6


def test_invariant_inner_product_ball():
    assert np.allclose(invariant_inner_product(ellipsoid_body(np.eye(3))), np.eye(3), atol=1e-8)


def test_invariant_inner_product_ellipse():
    p = invariant_inner_product(ellipsoid_body(Q_ELL))
    assert np.allclose(p / p[0, 0], Q_ELL / Q_ELL[0, 0], atol=1e-8)


def test_invariant_inner_product_square():
    p = invariant_inner_product(SQUARE)
    assert np.allclose(p / p[0, 0], np.eye(2), atol=1e-8)


def test_invariant_inner_product_averaging_oracle():
    # averaging an arbitrary form over the rotation group of the ellipse gives Q
    s = np.linalg.cholesky(Q_ELL).T  # Q = s^T s, s maps the ellipse to the disk
    sinv = np.linalg.inv(s)
    th = 2 * np.pi * np.arange(64) / 64
    p0 = np.array([[2.0, 0.7], [0.7, 1.0]])
    rots = [np.array([[np.cos(t), -np.sin(t)], [np.sin(t), np.cos(t)]]) for t in th]
    avg = np.mean([(sinv @ r @ s).T @ p0 @ (sinv @ r @ s) for r in rots], axis=0)
    p = invariant_inner_product(ellipsoid_body(Q_ELL))
    assert np.allclose(p / p[0, 0], avg / avg[0, 0], atol=1e-8)
