import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from sectionlab.body import body_from_norm, ellipsoid_body, lp_body
from sectionlab.errors import AsymmetricBody, DegenerateBivector, RankDeficient
from sectionlab.sections import (
    area_A, area_A_many, choose_nu, cross_section, hyperplane_graph,
    intersection_body_boundary, nu_kernel_residual, section_convexity,
)
from oracles import ellipse_A, radial_A

E3 = np.eye(3)
ELL123 = ellipsoid_body(np.diag([1.0, 1 / 4, 1 / 9]))


def test_hyperplane_graph_zero_covector():
    g = hyperplane_graph(np.zeros(3), np.eye(4)[3])
    assert np.array_equal(g, np.eye(4)[:, :3])


def test_hyperplane_graph_maps_into_tilted_plane():
    lam = np.array([0.3, -0.2, 0.5])
    nu = np.array([0.1, 0.2, 0.3, 1.0])
    g = hyperplane_graph(lam, nu)
    x = np.array([1.0, 2.0, -1.0])
    assert np.allclose(g @ x, np.r_[x, 0.0] + (lam @ x) * nu)


def test_cross_section_ball_is_disk():
    s = cross_section(ellipsoid_body(np.eye(3)), E3[:, :2])
    y = np.random.default_rng(0).standard_normal((20, 2))
    assert np.allclose(s.norm(y), np.linalg.norm(y, axis=1))


def test_cross_section_ellipsoid_semi_axes():
    s = cross_section(ELL123, E3[:, :2])
    assert s.norm([1.0, 0]) == pytest.approx(1.0)
    assert s.norm([0.0, 2.0]) == pytest.approx(1.0)


def test_cross_section_l4_tilted_is_convex():
    basis = np.array([[1.0, 0], [0, 1], [0.4, -0.3]])
    s = cross_section(lp_body(4, (1, 1, 1)), basis)
    assert section_convexity(s) <= 1e-12


def test_cross_section_rank_deficient():
    with pytest.raises(RankDeficient):
        cross_section(ELL123, np.array([[1.0, 2.0], [0, 0], [1, 2]]))


def test_area_unit_ball():
    assert abs(area_A(ellipsoid_body(np.eye(3)), E3[2]) - 1 / np.pi) < 1e-6


def test_area_ellipsoid_123():
    assert abs(area_A(ELL123, E3[2]) - ellipse_A(1.0, 2.0)) < 1e-6
    assert abs(area_A(ELL123, E3[0]) - ellipse_A(2.0, 3.0)) < 1e-6


def test_area_zero_bivector():
    with pytest.raises(DegenerateBivector):
        area_A(ELL123, np.zeros(3))


@settings(max_examples=25, deadline=None)
@given(st.lists(st.floats(-3, 3), min_size=6, max_size=6))
def test_area_matches_adaptive_quadrature(vals):
    u, v = np.array(vals[:3]), np.array(vals[3:])
    sigma = np.cross(u, v)
    if np.linalg.norm(sigma) < 0.2 * np.linalg.norm(u) * np.linalg.norm(v) or np.linalg.norm(sigma) < 1e-2:
        return  # keep the raw frame reasonably conditioned
    body = lp_body(4, (1.0, 1.5, 0.7))
    ref = radial_A(lambda x: body.norm(x), u, v)
    assert area_A(body, sigma) == pytest.approx(ref, rel=1e-8)
    # the raw frame is sampled at uniform angles in its own coordinates
    assert area_A(body, sigma, u=u, v=v) == pytest.approx(ref, rel=1e-6)


@settings(max_examples=25, deadline=None)
@given(st.lists(st.floats(-3, 3), min_size=3, max_size=3), st.floats(0.1, 10))
def test_area_homogeneous_and_even(vals, t):
    s = np.array(vals)
    if np.linalg.norm(s) < 1e-3:
        return
    a = area_A(ELL123, s)
    assert area_A(ELL123, t * s) == pytest.approx(t * a, rel=1e-12)
    assert area_A(ELL123, -s) == pytest.approx(a, rel=1e-12)


def test_area_many_matches_single():
    s = np.random.default_rng(3).standard_normal((7, 3))
    many = area_A_many(ELL123, s)
    assert np.allclose(many, [area_A(ELL123, x) for x in s], rtol=1e-13)


@pytest.mark.parametrize("q", [np.eye(4), np.diag([1.0, 2.0, 3.0, 4.0])])
def test_choose_nu_reflection_symmetric(q):
    body = ellipsoid_body(q)
    nu = choose_nu(body)
    assert np.linalg.norm(np.abs(nu) - np.eye(4)[3]) < 1e-5
    assert nu_kernel_residual(body, nu) < 1e-5


def test_choose_nu_kernel_and_step_stability():
    # a body without reflection symmetry through the coordinate hyperplane
    rng = np.random.default_rng(5)
    a = rng.standard_normal((4, 4))
    body = ellipsoid_body(a @ a.T + 3 * np.eye(4))
    nu1 = choose_nu(body, h=1e-3)
    nu2 = choose_nu(body, h=5e-4)
    assert nu_kernel_residual(body, nu1) < 1e-5
    assert np.linalg.norm(nu1 - nu2) < 1e-4
    assert abs(nu1[3]) < 0.999  # genuinely tilted


def test_intersection_body_ball_is_sphere():
    s = intersection_body_boundary(ellipsoid_body(np.eye(3)), grid=400)
    assert np.max(np.abs(s.radii - np.pi)) < 1e-6


def test_intersection_body_ellipsoid_convex():
    s = intersection_body_boundary(ELL123, grid=600)
    assert s.convexity_violation < 1e-6
    # radius along sigma is 1 / A(sigma)
    k = 17
    assert s.radii[k] == pytest.approx(1.0 / area_A(ELL123, s.directions[k]), rel=1e-12)


def test_intersection_body_asymmetric():
    b = body_from_norm(lambda x: np.linalg.norm(x, axis=-1) + 0.1 * x[..., 0], 3)
    with pytest.raises(AsymmetricBody):
        intersection_body_boundary(b, grid=50)
