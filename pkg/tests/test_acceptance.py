"""Acceptance suite: one check per criterion, each reported as a PASS/FAIL line.

Run under pytest (the summary is printed at the end of the session) or
directly with ``python3 tests/test_acceptance.py``.
"""

import sys
import time
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from sectionlab.body import ellipsoid_body, lp_body, make_body
from sectionlab.certify import classify_degenerate, fit_ellipse, min_norm_projector
from sectionlab.cli import fixture_path, parse_spec
from sectionlab.fields import euler_residual, reconstruct_r_coeffs, v_triple_coeffs
from sectionlab.flow import fixed_points, frame_flow, index_at, plane_flow_field
from sectionlab.grids import tangent_frame
from sectionlab.sections import SectionBody, area_A, choose_nu
from sectionlab.tensor import (
    J, build_r_orbit, build_r_smooth, random_tensor, rotation_tensor, skew_tensor,
)

from oracles import ellipse_A, l1_projector_norm, min_l1_projector_norm
from pipeline import certificate, stage

E3, E4 = np.eye(3), np.eye(4)
RESULTS = {}


def record(num, title, ok, detail):
    """Store and return one criterion outcome."""
    RESULTS[num] = (bool(ok), title, detail)
    return bool(ok)


def summary_lines():
    out = []
    for num in sorted(RESULTS):
        ok, title, detail = RESULTS[num]
        out.append(f"{'PASS' if ok else 'FAIL'}  criterion {num:2d}  {title}: {detail}")
    return out


def _projector_basis(n):
    return np.linalg.svd(np.asarray(n, float)[:, None])[0][:, 1:]


def criterion_1():
    rng = np.random.default_rng(101)
    t0 = time.perf_counter()
    c = np.array([random_tensor(rng).coeffs for _ in range(1000)])
    worst = float(np.max(euler_residual(v_triple_coeffs(c))))
    sec = time.perf_counter() - t0
    return record(1, "Euler identity", worst < 1e-14 and sec < 1.0,
                  f"max residual {worst:.2e} (<1e-14), {sec:.2f} s (<1 s)")


def criterion_2():
    rng = np.random.default_rng(102)
    t0 = time.perf_counter()
    c = np.array([random_tensor(rng).coeffs for _ in range(1000)])
    rec, _ = reconstruct_r_coeffs(v_triple_coeffs(c))
    err = float(np.max(np.abs(rec - c)))
    sec = time.perf_counter() - t0
    return record(2, "reconstruction round trip", err < 1e-10 and sec < 5.0,
                  f"max entry error {err:.2e} (<1e-10), {sec:.2f} s (<5 s)")


def criterion_3():
    t0 = time.perf_counter()
    ball = ellipsoid_body(np.eye(3))
    ell = ellipsoid_body(np.diag([1.0, 1 / 4.0, 1 / 9.0]))  # semi-axes 1, 2, 3
    # e1 ^ e2 is the third cofactor basis vector
    e_ball = abs(area_A(ball, E3[2], grid_n=512) - 1 / np.pi)
    e_ell = abs(area_A(ell, E3[2], grid_n=512) - ellipse_A(1.0, 2.0))
    sec = time.perf_counter() - t0
    ok = e_ball < 1e-6 and e_ell < 1e-6 and abs(ellipse_A(1.0, 2.0) - 1 / (2 * np.pi)) < 1e-15
    return record(3, "area oracle", ok and sec < 1.0,
                  f"ball err {e_ball:.1e}, ellipsoid err {e_ell:.1e} (<1e-6), {sec:.2f} s (<1 s)")


def criterion_4():
    t0 = time.perf_counter()
    norms, gaps = [], []
    for q in (np.eye(4), np.diag([1.0, 2.0, 3.0, 4.0])):
        body = ellipsoid_body(q)
        nu = choose_nu(body)
        rs = build_r_smooth(body, None, nu, h=1e-3)
        ro = build_r_orbit(body, None, nu)
        norms += [rs.norm, ro.norm]
        gaps.append((rs - ro).norm)
    sec = time.perf_counter() - t0
    ok = max(norms) < 1e-5 and max(gaps) < 1e-4 and sec < 60.0
    return record(4, "R vanishes on ellipsoids", ok,
                  f"max |R| {max(norms):.1e} (<1e-5), route gap {max(gaps):.1e} (<1e-4), "
                  f"{sec:.1f} s (<60 s)")


def criterion_5():
    rng = np.random.default_rng(105)
    a = rng.standard_normal((3, 3))
    r = skew_tensor(a=a)  # every R_lam is skew
    assert all(np.allclose(r(lam), -r(lam).T) for lam in E3)
    t0 = time.perf_counter()
    res = frame_flow(r, [1.0, 0.1, -0.2], [0.3, 1.0, 0.4], T=10.0, dt=1e-3,
                     body=ellipsoid_body(np.eye(3)))
    sec = time.perf_counter() - t0
    ok = res.psi_drift < 1e-6 and res.area_drift < 1e-6 and sec < 10.0
    return record(5, "frame-flow invariance", ok,
                  f"Psi drift {res.psi_drift:.1e}, A drift {res.area_drift:.1e} (<1e-6), "
                  f"{sec:.2f} s (<10 s)")


def criterion_6():
    rng = np.random.default_rng(106)
    worst, count = 0.0, 0
    for _ in range(3):
        m = rng.standard_normal((3, 3))
        q = m @ m.T + np.eye(3)
        b = rng.standard_normal((3, 3))
        a = b @ b.T + 0.5 * np.eye(3)  # positive definite: isolated zeros
        body = ellipsoid_body(q)
        fp = fixed_points(plane_flow_field(skew_tensor(a=a, q=q)), S=body)
        for s in fp.directions:
            u, v = tangent_frame(s)
            worst = max(worst, fit_ellipse(SectionBody(body, np.column_stack([u, v])))[1])
            count += 1
    ok = count > 0 and worst < 1e-6
    return record(6, "fixed-point sections are ellipses", ok,
                  f"{count} fixed points, worst fit residual {worst:.1e} (<1e-6)")


def _test_fields():
    rng = np.random.default_rng(107)
    fields = []
    for k in range(4):
        a = rng.standard_normal((3, 3))
        m = a + a.T if k % 2 == 0 else a
        fields.append(lambda x, m=m: np.cross(x, x @ m.T))
    for diag in ((1.0, 2.0, 3.0), (0.5, 1.5, 4.0)):
        fields.append(plane_flow_field(skew_tensor(a=np.diag(diag))))
    return fields


def criterion_7():
    sums = []
    for f in _test_fields():
        fp = fixed_points(f, grid=4096)
        sums.append(sum(index_at(f, d) for d in fp.directions))
    pole = index_at(lambda x: np.cross(E3[2], x), E3[2])
    ok = len(sums) >= 5 and all(s == 2 for s in sums) and pole == 1
    return record(7, "Poincare-Hopf accounting", ok,
                  f"index sums {sums} over {len(sums)} fields (all 2), rotation pole {pole} (1)")


def criterion_8():
    ball4 = ellipsoid_body(np.eye(4))
    rng = np.random.default_rng(108)
    dev = 0.0
    for n in rng.standard_normal((100, 4)):
        dev = max(dev, abs(min_norm_projector(ball4, _projector_basis(n))[1] - 1.0))
    f = np.ones(3)
    _, l1 = min_norm_projector(lp_body(1, (1.0, 1.0, 1.0)), _projector_basis(f))
    sym = l1_projector_norm(f, f / 3.0)
    grid = min_l1_projector_norm(f, n_grid=81)
    ok = dev <= 1e-6 and abs(l1 - 4 / 3) < 0.02 and abs(l1 - grid) < 0.02 \
        and abs(sym - 4 / 3) < 1e-12
    return record(8, "Kakutani gate", ok,
                  f"ball4 max |norm-1| {dev:.1e} (<=1e-6), l1 {l1:.4f} vs 4/3 "
                  f"(sym oracle {sym:.4f}, grid oracle {grid:.4f}, tol 0.02)")


def criterion_9():
    l4, t_l4 = certificate("l4ball4")
    ell, t_ell = certificate("ellipsoid4")
    probe = stage(l4, "tilt_probe")
    q_err = (float(np.max(np.abs(ell.recovered_Q - np.diag([1.0, 2.0, 3.0, 4.0]))))
             if ell.recovered_Q is not None else float("inf"))
    ok = (l4.status == "NOT_MONOCHROMATIC" and probe is not None and probe.residual > 1e-2
          and ell.status == "ELLIPSOID" and q_err < 1e-5 and max(t_l4, t_ell) < 300)
    return record(9, "negative control", ok,
                  f"l4 {l4.status} tilt residual {probe.residual:.2e} (>1e-2); "
                  f"ellipsoid {ell.status} |Q err| {q_err:.1e} (<1e-5); "
                  f"{t_l4:.0f} s / {t_ell:.0f} s (<300 s)")


def criterion_10():
    spec, _ = parse_spec(fixture_path("revolution3"))
    rev = make_body(spec)
    lam3j = rotation_tensor({2: 2})
    c2 = classify_degenerate(rev, lam3j)
    # L is reported at unit Frobenius norm, so it equals J up to scale and sign
    cos = abs(np.sum(c2.L * J[2])) / (np.linalg.norm(c2.L) * np.linalg.norm(J[2])) \
        if c2.L is not None else 0.0
    ok2 = (c2.kind == "Case2" and c2.label == "LinearTimesLinear" and abs(cos - 1) < 1e-10
           and c2.residuals["R_equals_CL"] < 1e-12 and c2.residuals["L_tangency"] < 1e-6)
    pd = classify_degenerate(ellipsoid_body(np.eye(3)), rotation_tensor({0: 0, 1: 1}))
    q_err = float(np.max(np.abs(pd.Q - np.eye(3)))) if pd.Q is not None else float("inf")
    ok = ok2 and pd.kind == "PartlyDegenerate" and q_err < 1e-6
    return record(10, "degenerate pipeline", ok,
                  f"{c2.kind}/{c2.label}, |cos(L, J)| {cos:.12f}, "
                  f"R=CL residual {c2.residuals['R_equals_CL']:.1e}, "
                  f"tangency {c2.residuals['L_tangency']:.1e}; "
                  f"{pd.kind} |Q - I| {q_err:.1e} (<1e-6)")


CRITERIA = [criterion_1, criterion_2, criterion_3, criterion_4, criterion_5,
            criterion_6, criterion_7, criterion_8, criterion_9, criterion_10]


@pytest.mark.parametrize("crit", CRITERIA, ids=[f"criterion_{k + 1}" for k in range(10)])
def test_acceptance(crit):
    num = int(crit.__name__.split("_")[1])
    assert crit(), RESULTS[num][2]


if __name__ == "__main__":
    for crit in CRITERIA:
        try:
            crit()
        except Exception as exc:  # report and keep going
            num = int(crit.__name__.split("_")[1])
            record(num, crit.__name__, False, f"{type(exc).__name__}: {exc}")
    print("\n".join(summary_lines()))
    sys.exit(0 if all(v[0] for v in RESULTS.values()) else 1)
