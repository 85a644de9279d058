"""Command-line frontend: body specs in, JSON report and CSV tables out.

A spec is a TOML document with two sections::

    [body]
    kind = "ellipsoid"
    Q = [[1, 0, 0, 0], [0, 2, 0, 0], [0, 0, 3, 0], [0, 0, 0, 4]]

    [config]
    seed = 0
    [config.gates]
    equivalence = 1e-4

Every subcommand writes ``report.json`` (``schema_version`` 1, sorted keys,
no timestamps, so equal inputs give equal bytes) plus CSV files with a header
row and 17 significant digits.  Exit status is 0 when the analysis ran to
completion, whatever its verdict, and 2 on errors.
"""

from __future__ import annotations

import argparse
import csv
import json
import re
import sys
from dataclasses import dataclass, field, asdict
from importlib import resources
from pathlib import Path
from typing import Optional

import numpy as np

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from .body import (BodySpec, boundary_points, homogeneity_error, make_body,
                   midpoint_violation, symmetry_check, tangent_space)
from .certify import CertifyConfig, certify_ellipsoid_4d, jsonable
from .errors import ParseError, SectionLabError, ValidationError, ZeroOnCircle
from .fields import (degenerate_set_sample, rank1_factorize, reconstruct_r_coeffs,
                     v_triple, v_triple_coeffs)
from .flow import fixed_points, frame_flow, index_at, orbit_classify, plane_flow_field, \
    representation_error
from .grids import sphere_grid
from .sections import (SectionBody, area_A, choose_nu, coordinate_hyperplane,
                       intersection_body_boundary, nu_kernel_residual)
from .tensor import (TensorR, build_r_orbit, build_r_smooth, cross_product_tensor,
                     random_tensor, rotation_tensor, skew_tensor, verify_r, zero_tensor)

SUBCOMMANDS = ("body-check", "area", "tensor", "fields", "flow", "certify")

DEFAULT_GATES = {
    "symmetry": 1e-8, "nu": 1e-5, "equivalence": 1e-4, "tensor": 1e-5, "route": 1e-4,
    "ellipse": 1e-5, "consistency": 1e-6, "psi_q": 1e-5, "cylinder": 1e-5,
    "kakutani": 1e-4, "convexity": 1e-10, "fixed_point": 1e-10, "degeneracy": 1e-6,
}

_BODY_KEYS = {
    "ellipsoid": {"kind", "Q"},
    "lp": {"kind", "p", "scales"},
    "perturbed": {"kind", "base", "eps", "direction"},
    "poly_norm": {"kind", "dim", "degree", "terms"},
}
_TENSORS = ("body", "zero", "cross", "rotation", "skew", "random")


@dataclass
class RunConfig:
    """Grids, gates, integration settings and seed of a run."""

    seed: int = 0
    jobs: int = 1
    sphere_nodes: int = 2048
    angular_nodes: int = 512
    dt: float = 1e-3
    T: float = 10.0
    h: float = 1e-3
    t_seq: tuple = (1e-2, 5e-3, 2.5e-3)
    n_kakutani: int = 100
    x_basis: Optional[list] = None
    tensor: Optional[str] = None
    tensor_assign: Optional[list] = None
    tensor_a: Optional[list] = None
    tensor_q: Optional[list] = None
    u0: tuple = (1.0, 0.2, 0.0)
    v0: tuple = (0.1, 1.0, 0.5)
    sigma0: Optional[list] = None
    out: Optional[str] = None
    gates: dict = field(default_factory=lambda: dict(DEFAULT_GATES))

    def validate(self) -> None:
        for name in ("sphere_nodes", "angular_nodes", "n_kakutani", "jobs"):
            v = getattr(self, name)
            if not isinstance(v, int) or isinstance(v, bool) or v < 1:
                raise ValidationError(name, "must be a positive integer")
        if not isinstance(self.seed, int) or isinstance(self.seed, bool) or self.seed < 0:
            raise ValidationError("seed", "must be a non-negative integer")
        for name in ("dt", "T", "h"):
            v = getattr(self, name)
            if not isinstance(v, (int, float)) or not np.isfinite(v) or v <= 0:
                raise ValidationError(name, "must be positive")
        if len(self.t_seq) < 2 or min(self.t_seq) <= 0:
            raise ValidationError("t_seq", "needs at least two positive steps")
        for k, v in self.gates.items():
            if k not in DEFAULT_GATES:
                raise ValidationError(f"gates.{k}", "unknown gate")
            if not isinstance(v, (int, float)) or isinstance(v, bool) or not v > 0:
                raise ValidationError(f"gates.{k}", "must be positive")
        if self.tensor is not None and self.tensor not in _TENSORS:
            raise ValidationError("tensor", f"must be one of {', '.join(_TENSORS)}")
        if self.x_basis is not None and np.shape(self.x_basis) != (4, 3):
            raise ValidationError("x_basis", "must be a 4 x 3 matrix (basis as columns)")
        for name in ("u0", "v0"):
            if np.shape(getattr(self, name)) != (3,):
                raise ValidationError(name, "must have three entries")
        if np.linalg.norm(np.cross(self.u0, self.v0)) < 1e-12:
            raise ValidationError("v0", "must be independent of u0")

    def certify_config(self) -> CertifyConfig:
        g = self.gates
        return CertifyConfig(
            x_basis=self.x_basis, h=self.h, t_seq=tuple(self.t_seq),
            gate_symmetry=g["symmetry"], gate_nu=g["nu"], gate_equivalence=g["equivalence"],
            gate_tensor=g["tensor"], gate_route=g["route"], gate_ellipse=g["ellipse"],
            gate_consistency=g["consistency"], gate_psi_q=g["psi_q"],
            gate_cylinder=g["cylinder"], gate_kakutani=g["kakutani"],
            n_kakutani=self.n_kakutani, seed=self.seed, jobs=self.jobs)


_CONFIG_KEYS = {f for f in RunConfig.__dataclass_fields__}


# --------------------------------------------------------------------------
# parsing

def _locate(text: str, key: str, section: Optional[str] = None):
    """Line and column of ``key = ...``, searched inside ``section`` when given."""
    current = None
    pat = re.compile(r'^\s*"?' + re.escape(key) + r'"?\s*=')
    for i, line in enumerate(text.splitlines(), 1):
        hdr = re.match(r"^\s*\[+\s*([^\]]+?)\s*\]+", line)
        if hdr:
            current = hdr.group(1)
            if current.split(".")[-1] == key and (section is None or current.startswith(section)):
                return i, line.index(key) + 1
            continue
        if (section is None or current == section) and pat.match(line):
            return i, line.index(key) + 1
    return None, None


def _unknown(text, key, section):
    line, col = _locate(text, key, section)
    return ParseError(f"unknown key {key!r} in [{section}]", line, col)


def _spec_from_table(tab: dict, text: str, section: str = "body") -> BodySpec:
    kind = tab.get("kind")
    if kind is None:
        raise ValidationError("kind", "required")
    if kind not in _BODY_KEYS:
        raise ValidationError("kind", f"unknown kind {kind!r}")
    for k in tab:
        if k not in _BODY_KEYS[kind]:
            raise _unknown(text, k, section)
    try:
        if kind == "ellipsoid":
            return BodySpec(kind, Q=tuple(map(tuple, np.asarray(tab.get("Q"), float))))
        if kind == "lp":
            scales = tab.get("scales")
            return BodySpec(kind, p=float(tab.get("p", np.nan)),
                            scales=None if scales is None else tuple(float(s) for s in scales))
        if kind == "perturbed":
            base = tab.get("base")
            if not isinstance(base, dict):
                raise ValidationError("base", "must be a table describing a body")
            return BodySpec(kind, base=_spec_from_table(base, text, f"{section}.base"),
                            eps=tab.get("eps"),
                            direction=None if tab.get("direction") is None
                            else tuple(float(v) for v in tab["direction"]))
        terms = tab.get("terms") or ()
        parsed = []
        for t in terms:
            if not (isinstance(t, list) and len(t) == 2 and isinstance(t[1], list)):
                raise ValidationError("terms", "each term is [coefficient, [exponents]]")
            parsed.append((float(t[0]), tuple(int(e) for e in t[1])))
        return BodySpec(kind, dim=tab.get("dim"), degree=tab.get("degree"), terms=tuple(parsed))
    except (TypeError, ValueError) as exc:
        raise ValidationError(kind, f"malformed field ({exc})") from None


def parse_text(text: str) -> tuple[BodySpec, RunConfig]:
    """Parse spec text; see :func:`parse_spec`."""
    try:
        doc = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        msg = str(exc).split(" (at line")[0]
        raise ParseError(msg, getattr(exc, "lineno", None), getattr(exc, "colno", None)) from None
    for k in doc:
        if k not in ("body", "config"):
            line, col = _locate(text, k)
            raise ParseError(f"unknown section {k!r}", line, col)
    if "body" not in doc:
        raise ParseError("missing [body] section")
    spec = _spec_from_table(doc["body"], text)
    spec.validate()
    raw = dict(doc.get("config", {}))
    for k in raw:
        if k not in _CONFIG_KEYS:
            raise _unknown(text, k, "config")
    gates = dict(DEFAULT_GATES)
    for k, v in raw.pop("gates", {}).items():
        if k not in DEFAULT_GATES:
            raise _unknown(text, k, "config.gates")
        gates[k] = v
    for k in ("t_seq", "u0", "v0"):
        if k in raw:
            raw[k] = tuple(raw[k])
    cfg = RunConfig(**raw, gates=gates)
    cfg.validate()
    return spec, cfg


def parse_spec(path) -> tuple[BodySpec, RunConfig]:
    """Read a TOML spec with sections ``[body]`` and ``[config]``.

    Raises
    ------
    ParseError
        Malformed TOML or unknown keys (with line and column when known).
    ValidationError
        A field violates its invariant (the field name is in ``.field``).
    """
    return parse_text(Path(path).read_text())


def fixture_path(name: str) -> Path:
    """Path of a bundled fixture (``ellipsoid4.toml``, ``l4ball4.toml``, ``revolution3.toml``)."""
    if not name.endswith(".toml"):
        name += ".toml"
    return Path(str(resources.files("sectionlab") / "fixtures" / name))


# --------------------------------------------------------------------------
# output helpers

def _fmt(v):
    if isinstance(v, (float, np.floating)):
        return "%.17g" % v
    if isinstance(v, (bool, np.bool_)):
        return str(bool(v)).lower()
    return str(v)


def write_csv(path, header, rows) -> None:
    """Comma-separated table with a header row; floats with 17 significant digits."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for r in rows:
            w.writerow([_fmt(v) for v in r])


def _save_array(path, header, data) -> None:
    np.savetxt(path, np.atleast_2d(data), delimiter=",", fmt="%.17g",
               header=",".join(header), comments="")


def _spec_dict(spec: BodySpec) -> dict:
    d = {k: v for k, v in asdict(spec).items() if v is not None and k != "extra"}
    if spec.base is not None:
        d["base"] = _spec_dict(spec.base)
    return d


# --------------------------------------------------------------------------
# subcommands

def _section3(body, cfg):
    if body.dim == 3:
        return body, None
    if body.dim == 4:
        xb = coordinate_hyperplane(4) if cfg.x_basis is None else np.asarray(cfg.x_basis, float)
        return SectionBody(body, xb), xb
    raise ValidationError("dim", "this subcommand needs a body in R^3 or R^4")


def _need4(body):
    if body.dim != 4:
        raise ValidationError("dim", "this subcommand needs a body in R^4")


def _tensor(body, cfg) -> tuple[TensorR, str]:
    kind = cfg.tensor or ("body" if body.dim == 4 else "skew")
    if kind == "body":
        _need4(body)
        xb = coordinate_hyperplane(4) if cfg.x_basis is None else np.asarray(cfg.x_basis, float)
        nu = choose_nu(body, xb, cfg.h)
        return build_r_smooth(body, xb, nu, cfg.h, cfg.gates["equivalence"], seed=cfg.seed), kind
    if kind == "zero":
        return zero_tensor(), kind
    if kind == "cross":
        return cross_product_tensor(), kind
    if kind == "rotation":
        if not cfg.tensor_assign:
            raise ValidationError("tensor_assign", "required for tensor = 'rotation'")
        return rotation_tensor({int(i): int(k) for i, k in cfg.tensor_assign}), kind
    if kind == "skew":
        return skew_tensor(cfg.tensor_a, cfg.tensor_q), kind
    return random_tensor(np.random.default_rng(cfg.seed)), kind


def _body_check(spec, body, cfg, out):
    x = boundary_points(body, sphere_grid(body.dim, cfg.sphere_nodes, cfg.seed))
    _save_array(out / "boundary.csv", [f"x{i + 1}" for i in range(body.dim)], x)
    tdims = [len(tangent_space(body, p)) for p in x[:: max(1, len(x) // 16)][:16]]
    return {
        "dim": body.dim, "name": body.name, "smooth": body.smooth,
        "symmetric": bool(body.symmetric),
        "midpoint_violation": midpoint_violation(body, seed=cfg.seed),
        "homogeneity_error": homogeneity_error(body, seed=cfg.seed),
        "symmetry_residual": symmetry_check(body),
        "tangent_space_dims": tdims,
    }, ["boundary.csv"]


def _area(spec, body, cfg, out):
    K, xb = _section3(body, cfg)
    rep = {"A_coordinate": [area_A(K, e, cfg.angular_nodes) for e in np.eye(3)]}
    ib = intersection_body_boundary(K, cfg.sphere_nodes, cfg.angular_nodes, seed=cfg.seed)
    ib.to_csv(out / "intersection_body.csv")
    rep["intersection_body"] = {"nodes": len(ib.radii), "convexity_violation":
                                ib.convexity_violation, "r_min": ib.radii.min(),
                                "r_max": ib.radii.max()}
    if xb is not None:
        nu, info = choose_nu(body, xb, cfg.h, return_info=True)
        rep["nu"] = nu
        rep["nu_info"] = info
        rep["nu_kernel_residual"] = nu_kernel_residual(body, nu, xb, cfg.h)
    return rep, ["intersection_body.csv"]


def _tensor_cmd(spec, body, cfg, out):
    _need4(body)
    xb = coordinate_hyperplane(4) if cfg.x_basis is None else np.asarray(cfg.x_basis, float)
    nu = choose_nu(body, xb, cfg.h)
    tol = cfg.gates["equivalence"]
    rs = build_r_smooth(body, xb, nu, cfg.h, tol, seed=cfg.seed)
    ro = build_r_orbit(body, xb, nu, tuple(cfg.t_seq), tol, seed=cfg.seed)
    rep = verify_r(body, xb, rs.nu, rs)
    idx = np.indices((3, 3, 3)).reshape(3, -1).T
    rows = [(i, j, k, rs.coeffs[i, j, k], ro.coeffs[i, j, k]) for i, j, k in idx]
    write_csv(out / "tensor.csv", ["lam", "row", "col", "smooth", "orbit"], rows)
    return {
        "nu": nu, "nu_adjusted": rs.nu, "R_smooth": rs.coeffs, "R_orbit": ro.coeffs,
        "R_smooth_norm": rs.norm, "R_orbit_norm": ro.norm,
        "route_agreement": (rs - ro).norm,
        "equivalence_residual_smooth": rs.info.get("equivalence_residual"),
        "equivalence_residual_orbit": ro.info.get("equivalence_residual"),
        "C": ro.info.get("C"), "verification": rep.as_dict(),
    }, ["tensor.csv"]


def _fields(spec, body, cfg, out):
    R, kind = _tensor(body, cfg)
    (v1, v2, v3), euler = v_triple(R)
    rc, rres = reconstruct_r_coeffs(v_triple_coeffs(R.coeffs))
    ds = degenerate_set_sample(R, cfg.sphere_nodes, cfg.gates["degeneracy"])
    ds.to_csv(out / "degeneracy.csv")
    rep = {"tensor": kind, "R": R.coeffs, "euler_residual": euler,
           "reconstruction_error": float(np.max(np.abs(rc - R.coeffs))),
           "reconstruction_residual": float(rres),
           "degenerate_set": {"kind": ds.kind, "n_points": len(ds.points),
                              "points": ds.points}}
    if ds.kind == "everything":
        f = rank1_factorize(v1, v2, v3)
        rep["rank1"] = {"case": f.case, "residual": f.residual, "minor_norm": f.minor_norm,
                        "factors": f.factors}
    return rep, ["degeneracy.csv"]


def _flow(spec, body, cfg, out):
    K, _ = _section3(body, cfg)
    R, kind = _tensor(body, cfg)
    W = plane_flow_field(R)
    fp = fixed_points(W, K, tol=cfg.gates["fixed_point"], grid=cfg.sphere_nodes)
    fp.to_csv(out / "fixed_points.csv")
    idx = []
    for d in ([] if fp.identically_zero else fp.directions):
        try:
            idx.append(index_at(W, d))
        except ZeroOnCircle:
            idx.append(None)  # zero is not isolated
    ff = frame_flow(R, cfg.u0, cfg.v0, cfg.T, cfg.dt, body=K)
    _save_array(out / "frame_trajectory.csv", ["t", "u1", "u2", "u3", "v1", "v2", "v3"],
                np.column_stack([ff.u.times, ff.u.states, ff.v.states]))
    rep = {"tensor": kind, "R": R.coeffs, "W": W.coeffs,
           "representation_error": representation_error(R, W),
           "fixed_points": {"points": fp.points, "residuals": fp.residuals,
                            "identically_zero": fp.identically_zero, "indices": idx,
                            "index_sum": None if None in idx else int(sum(idx))},
           "frame_flow": {"T": cfg.T, "dt": cfg.dt, "psi_drift": ff.psi_drift,
                          "area_drift": ff.area_drift}}
    files = ["fixed_points.csv", "frame_trajectory.csv"]
    if cfg.sigma0 is not None:
        orb = orbit_classify(W, K, cfg.sigma0, T=cfg.T, dt=cfg.dt)
        rep["orbit"] = {"sigma0": cfg.sigma0, "kind": orb.kind, "period": orb.period,
                        "endpoint": orb.endpoint}
        if orb.trajectory is not None:
            _save_array(out / "orbit.csv", ["t", "s1", "s2", "s3"],
                        np.column_stack([orb.trajectory.times, orb.trajectory.states]))
            files.append("orbit.csv")
    return rep, files


def _certify(spec, body, cfg, out):
    _need4(body)
    cert = certify_ellipsoid_4d(body, cfg.certify_config())
    d = cert.to_dict()
    write_csv(out / "stages.csv", ["name", "residual", "gate", "pass"],
              [(s.name, float(s.residual), float(s.gate), s.passed) for s in cert.stages])
    return d, ["stages.csv"]


_HANDLERS = {"body-check": _body_check, "area": _area, "tensor": _tensor_cmd,
             "fields": _fields, "flow": _flow, "certify": _certify}


def run(subcommand: str, spec_path, out_dir=None, seed: Optional[int] = None,
        jobs: Optional[int] = None, gates: Optional[dict] = None) -> int:
    """Run one subcommand and write its outputs; returns the exit code.

    ``seed``, ``jobs`` and ``gates`` override the spec's ``[config]``.
    """
    try:
        if subcommand not in _HANDLERS:
            raise ValidationError("subcommand", f"must be one of {', '.join(SUBCOMMANDS)}")
        path = Path(spec_path)
        if not path.exists() and fixture_path(path.name).exists():
            path = fixture_path(path.name)
        spec, cfg = parse_spec(path)
        if seed is not None:
            cfg.seed = seed
        if jobs is not None:
            cfg.jobs = jobs
        for k, v in (gates or {}).items():
            cfg.gates[k] = v
        cfg.validate()
        out = Path(out_dir or cfg.out or "sectionlab-out")
        out.mkdir(parents=True, exist_ok=True)
        body = make_body(spec, seed=cfg.seed, tol=cfg.gates["convexity"])
        result, files = _HANDLERS[subcommand](spec, body, cfg, out)
        if subcommand == "certify":
            report = dict(result)
            report["subcommand"] = subcommand
        else:
            report = {"schema_version": 1, "subcommand": subcommand, "result": result}
        report["body"] = _spec_dict(spec)
        report["config"] = {k: v for k, v in asdict(cfg).items() if k != "out"}
        report["files"] = files
        (out / "report.json").write_text(
            json.dumps(jsonable(report), indent=2, sort_keys=True) + "\n")
    except (SectionLabError, OSError, ValueError) as exc:
        print(f"sectionlab {subcommand}: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2
    return 0


def _split_gates(argv):
    rest, gates = [], {}
    it = iter(argv)
    for tok in it:
        if tok.startswith("--gate."):
            name, _, val = tok[len("--gate."):].partition("=")
            if not val:
                val = next(it, None)
            if val is None:
                raise SystemExit(f"--gate.{name} needs a value")
            try:
                gates[name] = float(val)
            except ValueError:
                raise SystemExit(f"--gate.{name}: not a number: {val!r}") from None
        else:
            rest.append(tok)
    return rest, gates


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    try:
        argv, gates = _split_gates(argv)
    except SystemExit as exc:
        print(f"sectionlab: {exc}", file=sys.stderr)
        return 2
    ap = argparse.ArgumentParser(
        prog="sectionlab",
        description="Analyse convex bodies whose hyperplane sections are linearly equivalent.",
        epilog="Gate overrides: --gate.NAME VALUE with NAME in "
               + ", ".join(sorted(DEFAULT_GATES)))
    ap.add_argument("subcommand", choices=SUBCOMMANDS)
    ap.add_argument("--spec", required=True,
                    help="TOML spec, or the name of a bundled fixture")
    ap.add_argument("--out", default=None, help="output directory")
    ap.add_argument("--jobs", type=int, default=None, help="worker threads for inner scans")
    ap.add_argument("--seed", type=int, default=None)
    try:
        args = ap.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    return run(args.subcommand, args.spec, args.out, args.seed, args.jobs, gates)
