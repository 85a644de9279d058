import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from sectionlab.body import ellipsoid_body, make_body
from sectionlab.cli import fixture_path, parse_spec
from sectionlab.equivalence import self_equivalence_algebra
from sectionlab.errors import Blowup, ZeroOnCircle
from sectionlab.fields import v_field
from sectionlab.flow import (
    fixed_points, frame_flow, index_at, integrate, one_param_group_check, orbit_classify,
    plane_flow_direct, plane_flow_field, representation_error, winding_number,
)
from sectionlab.sections import area_A
from sectionlab.tensor import cross_product_tensor, random_tensor, rotation_tensor, skew_tensor
from oracles import plane_flow_pointwise, winding_by_argument

E = np.eye(3)
J2 = np.array([[0.0, -1.0], [1.0, 0.0]])
DISK = ellipsoid_body(np.eye(2))
BALL = ellipsoid_body(np.eye(3))
LAM3J = rotation_tensor({2: 2})


@pytest.fixture(scope="module")
def revolution():
    spec, _ = parse_spec(fixture_path("revolution3"))
    return make_body(spec)


def test_rotation_on_disk_preserves_norm():
    tr = integrate(lambda x: J2 @ x, [1.0, 0.0], T=10.0, dt=1e-3, body=DISK)
    assert tr.invariant_drift < 1e-9
    assert np.allclose(tr.states[-1], [np.cos(10.0), np.sin(10.0)], atol=1e-9)


def test_radial_field_drift_and_blowup():
    tr = integrate(lambda x: x, [1.0, 0.0, 0.0], T=2.0, dt=1e-3, body=BALL)
    assert tr.invariant_drift == pytest.approx(np.exp(2.0) - 1.0, rel=1e-9)
    with pytest.raises(Blowup):
        integrate(lambda x: x, [1.0, 0.0, 0.0], T=20.0, dt=1e-3)


def test_quadratic_tangent_field_on_ball():
    w = v_field(cross_product_tensor(), E[0], E[1])
    x0 = np.array([0.6, 0.0, 0.8])
    tr = integrate(w, x0, T=10.0, dt=1e-3, body=BALL)
    assert tr.invariant_drift < 1e-7


def test_one_param_group_check():
    assert one_param_group_check(J2, DISK) < 1e-10
    assert one_param_group_check(J2, ellipsoid_body(np.diag([1.0, 4.0]))) > 0.1
    ell = ellipsoid_body(np.array([[1.0, 0.3], [0.3, 0.5]]))
    alg = self_equivalence_algebra(ell)
    assert one_param_group_check(alg.basis[0], ell) < 1e-5


def test_plane_flow_examples():
    assert plane_flow_field(cross_product_tensor()).is_zero(1e-14)
    w = plane_flow_field(LAM3J)
    assert np.allclose(w(E[2][None]), 0.0, atol=1e-15)


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**31 - 1))
def test_plane_flow_matches_pointwise_oracle(seed):
    rng = np.random.default_rng(seed)
    r = random_tensor(rng)
    w = plane_flow_field(r)
    s = rng.standard_normal(3)
    assert np.allclose(w(s[None])[0], plane_flow_pointwise(r.coeffs, s), atol=1e-12)
    assert np.allclose(plane_flow_direct(r, s), plane_flow_pointwise(r.coeffs, s), atol=1e-12)
    assert representation_error(r, w, n=10, seed=seed % 1000) < 1e-12


def test_frame_flow_equatorial_plane_fixed():
    res = frame_flow(LAM3J, E[0], E[1], T=1.0, dt=1e-3, body=BALL)
    u, v = res.u.states, res.v.states
    assert np.allclose(np.cross(u, v), E[2], atol=1e-12)
    assert np.linalg.norm(u[-1] - E[0]) > 0.5  # the frame rotates
    assert res.psi_drift < 1e-9 and res.area_drift < 1e-9


def test_frame_flow_invariants_on_ellipsoid():
    q = np.diag([1.0, 2.0, 3.0])
    r = skew_tensor(a=np.diag([1.0, 2.0, 0.5]), q=q)
    res = frame_flow(r, [1.0, 0.2, 0.0], [0.1, 1.0, 0.5], T=5.0, dt=1e-3,
                     body=ellipsoid_body(q))
    assert res.psi_drift < 1e-6 and res.area_drift < 1e-6


def test_fixed_points_identically_zero():
    fp = fixed_points(plane_flow_field(cross_product_tensor()))
    assert fp.identically_zero and len(fp) == 0


def test_fixed_points_equatorial_on_revolution_body(revolution):
    fp = fixed_points(plane_flow_field(LAM3J), S=revolution)
    hit = [d for d in fp.directions if abs(abs(d @ E[2]) - 1.0) < 1e-6]
    assert hit
    # the fixed point lies on the surface A = 1 of the revolution body
    k = int(np.argmax(np.abs(fp.directions @ E[2])))
    assert area_A(revolution, fp.points[k]) == pytest.approx(1.0, abs=1e-10)


def test_fixed_points_of_skew_tensor_are_eigen_directions():
    a = np.diag([1.0, 2.0, 3.0])
    fp = fixed_points(plane_flow_field(skew_tensor(a=a)))
    assert len(fp) == 6
    assert np.allclose(np.sort(np.abs(fp.directions).max(axis=1)), 1.0, atol=1e-9)


def test_orbit_closed_latitude_circle():
    rot = lambda x: np.cross(E[2], x)
    res = orbit_classify(rot, None, [0.6, 0.0, 0.8], T=10.0)
    assert res.kind == "ClosedOrbit"
    assert res.period == pytest.approx(2 * np.pi, abs=1e-6)


def test_orbit_converges_on_gradient_flow():
    # minus the tangential gradient of the height x3: attracted to the south pole
    grad = lambda x: -(E[2] - (x @ E[2]) * x / (x @ x))
    res = orbit_classify(grad, None, [0.6, 0.0, 0.8], T=50.0)
    assert res.kind == "ConvergesToFixed"
    assert np.allclose(res.endpoint / np.linalg.norm(res.endpoint), -E[2], atol=1e-6)


def test_orbit_trivial_field():
    res = orbit_classify(plane_flow_field(cross_product_tensor()), None, [0.0, 0.6, 0.8])
    assert res.kind == "ConvergesToFixed"


def test_index_rotation_pole():
    assert index_at(lambda x: np.cross(E[2], x), E[2]) == 1


def test_index_planar_chart_field():
    f = lambda p: np.array([p[0] ** 2 - p[1] ** 2, 2 * p[0] * p[1]])
    assert index_at(f, np.zeros(2)) == 2
    assert winding_by_argument(f, np.zeros(2), 0.05) == 2
    g = lambda p: np.array([p[0], -p[1]])
    assert index_at(g, np.zeros(2)) == -1 == winding_by_argument(g, np.zeros(2), 0.05)


def test_winding_number_loop():
    th = np.linspace(0, 2 * np.pi, 100, endpoint=False)
    assert winding_number(np.column_stack([np.cos(3 * th), np.sin(3 * th)])) == 3


@pytest.mark.parametrize("seed", range(4))
def test_index_sum_random_tangent_quadratic(seed):
    # x -> x cross M x is tangent to the sphere with zeros at real eigenvectors of M
    rng = np.random.default_rng(seed)
    a = rng.standard_normal((3, 3))
    m = a + a.T if seed % 2 == 0 else a
    f = lambda x: np.cross(x, x @ m.T)
    fp = fixed_points(f, grid=4096)
    assert len(fp) in (2, 6)
    assert sum(index_at(f, d) for d in fp.directions) == 2


def test_index_on_circle_of_zeros_raises():
    # the plane flow of lam3 J vanishes on the great circle sigma3 = 0
    w = plane_flow_field(LAM3J)
    with pytest.raises(ZeroOnCircle):
        index_at(w, E[0], radius=0.05)
