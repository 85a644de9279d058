import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from sectionlab.algebra import PolyVectorField, monomials
from sectionlab.errors import DegeneracyMismatch, Inconsistent
from sectionlab.fields import (
    degenerate_set_sample, euler_residual, invariant_form, planar_cubic_field, planar_zeros,
    rank1_factorize, reconstruct_r, reconstruct_r_coeffs, t_r_dim, v_field, v_triple,
    v_triple_coeffs,
)
from sectionlab.tensor import J, TensorR, cross_product_tensor, random_tensor, rotation_tensor
from oracles import v_pointwise

E = np.eye(3)
LAM3J = rotation_tensor({2: 2})
LAM12 = rotation_tensor({0: 0, 1: 1})
seeds = st.integers(0, 2**31 - 1)


def test_t_r_dim_examples():
    cross = cross_product_tensor()
    for p in (E[0], np.array([0.3, -1.2, 0.5])):
        assert t_r_dim(cross, p).dim == 2
    assert t_r_dim(LAM3J, E[2]).dim == 0
    assert t_r_dim(LAM3J, E[0]).dim == 1
    assert t_r_dim(cross, np.zeros(3)).dim == 0


def test_v_field_examples():
    r = random_tensor(np.random.default_rng(0))
    assert v_field(r, E[0] + E[1], E[0] + E[1]).is_zero(1e-15)
    assert np.allclose(v_field(cross_product_tensor(), E[0], E[1])(E[2][None]), 0.0)
    assert np.allclose(v_field(LAM3J, E[2], E[0])(E[0][None])[0], E[1])


@settings(max_examples=40, deadline=None)
@given(seeds)
def test_v_triple_matches_pointwise_definition(seed):
    rng = np.random.default_rng(seed)
    r = random_tensor(rng)
    vs, _ = v_triple(r)
    x = rng.standard_normal(3)
    got = np.array([v(x[None])[0] for v in vs])
    assert np.allclose(got, v_pointwise(r.coeffs, x), atol=1e-12)


@settings(max_examples=40, deadline=None)
@given(seeds)
def test_euler_identity_pointwise(seed):
    rng = np.random.default_rng(seed)
    c = random_tensor(rng, trace_free=False).coeffs  # holds for any tensor
    x = rng.standard_normal(3)
    assert np.linalg.norm(x @ v_pointwise(c, x)) < 1e-12 * (1 + np.abs(c).max()) * (x @ x) ** 1.5
    assert euler_residual(v_triple_coeffs(c)) < 1e-14 * max(1.0, np.abs(c).max())


def test_v_triple_zero_and_rotation():
    vs, res = v_triple(TensorR(np.zeros((3, 3, 3))))
    assert all(v.is_zero() for v in vs) and res == 0.0
    vs, _ = v_triple(LAM3J)
    x = np.random.default_rng(1).standard_normal((10, 3))
    jx = x @ J[2].T
    assert np.allclose(vs[0](x), -x[:, 1:2] * jx)
    assert np.allclose(vs[1](x), x[:, 0:1] * jx)
    assert vs[2].is_zero()


def test_reconstruct_round_trip_batch():
    rng = np.random.default_rng(2)
    c = np.array([random_tensor(rng).coeffs for _ in range(1000)])
    rec, res = reconstruct_r_coeffs(v_triple_coeffs(c))
    assert np.max(np.abs(rec - c)) < 1e-10
    assert np.max(res) < 1e-10


def test_reconstruct_zero_and_rotation():
    z = PolyVectorField.zero(3, 2, 3)
    assert reconstruct_r(z, z, z).norm == 0.0
    vs, _ = v_triple(LAM3J)
    r = reconstruct_r(*vs)
    assert np.allclose(r.coeffs, LAM3J.coeffs, atol=1e-12)
    # R_lam = C_lam J with C the third coordinate of lam
    for lam in np.random.default_rng(3).standard_normal((5, 3)):
        assert np.allclose(r(lam), lam[2] * J[2], atol=1e-12)


def test_reconstruct_rejects_inconsistent():
    rng = np.random.default_rng(4)
    bad = [PolyVectorField(3, 2, rng.standard_normal((3, 6))) for _ in range(3)]
    with pytest.raises(Inconsistent):
        reconstruct_r(*bad)


def test_rank1_linear_times_linear():
    vs, _ = v_triple(LAM3J)
    f = rank1_factorize(*vs)
    assert f.case == "LinearTimesLinear"
    L, ell = f.factors["L"], f.factors["ell"]
    # L is normalized to unit Frobenius norm, so it is J / |J| up to sign
    assert np.allclose(np.abs(np.sum(L * J[2])), np.linalg.norm(J[2]), atol=1e-10)
    assert np.linalg.norm(L) == pytest.approx(1.0)
    # ell_i L reproduces V_i, and ell is proportional to (-x2, x1, 0)
    x = np.random.default_rng(5).standard_normal((10, 3))
    for i in range(3):
        assert np.allclose((x @ ell[i])[:, None] * (x @ L.T), vs[i](x), atol=1e-10)
    k = ell[1, 0]
    assert np.allclose(ell, k * np.array([[0, -1, 0], [1, 0, 0], [0, 0, 0]]), atol=1e-10)


def test_rank1_constant_times_quadratic():
    q = PolyVectorField(3, 2, np.random.default_rng(6).standard_normal((3, 6)))
    f = rank1_factorize(q * 2.0, q * -1.0, q * 0.0)
    assert f.case == "ConstantTimesQuadratic"
    c = f.factors["C"]
    assert np.allclose(c / c[0] * 2.0, [2.0, -1.0, 0.0], atol=1e-12)


def test_rank1_rejects_cross_product():
    f = rank1_factorize(*v_triple(cross_product_tensor())[0])
    assert f.case == "NotRank1" and f.minor_norm > 0.1


def test_degenerate_set_classes():
    assert degenerate_set_sample(cross_product_tensor(), grid=400).kind == "empty"
    assert degenerate_set_sample(LAM3J, grid=400).kind == "everything"
    ds = degenerate_set_sample(LAM12, grid=400)
    assert ds.kind == "proper"
    assert t_r_dim(LAM12, E[0]).dim == 1
    assert t_r_dim(LAM12, E[2]).dim == 2
    for p in ds.points:
        assert t_r_dim(LAM12, p).dim < 2


def test_planar_cubic_field_vanishes_at_degenerate_axis():
    w = planar_cubic_field(LAM12, np.column_stack([E[0], E[2]]))
    assert w.degree == 3
    assert np.max(np.abs(w(np.array([[1.0, 0.0]])))) < 1e-12
    assert w.component(2).is_zero(1e-14)
    zs = planar_zeros(w)
    assert np.any(np.abs(zs) < 1e-9) or np.any(np.abs(zs - np.pi) < 1e-9)


def test_planar_cubic_field_role_mismatch():
    with pytest.raises(DegeneracyMismatch):
        planar_cubic_field(LAM12, np.column_stack([E[2], E[0]]))


def test_invariant_form():
    s = invariant_form(J[2])
    assert s is not None and np.allclose(J[2].T @ s + s @ J[2], 0.0)
    assert invariant_form(np.diag([1.0, -1.0, 0.0])) is None
