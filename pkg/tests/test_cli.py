import csv
import json
import subprocess
import sys

import numpy as np
import pytest

from sectionlab.cli import DEFAULT_GATES, fixture_path, main, parse_spec, parse_text, run
from sectionlab.errors import ParseError, ValidationError

E3 = np.eye(3)


def _report(out):
    return json.loads((out / "report.json").read_text())


def _rows(path):
    with open(path, newline="") as fh:
        return list(csv.reader(fh))


def test_bundled_ellipsoid_fixture():
    spec, cfg = parse_spec(fixture_path("ellipsoid4"))
    assert spec.kind == "ellipsoid"
    assert np.array_equal(np.asarray(spec.Q), np.diag([1.0, 2.0, 3.0, 4.0]))
    assert cfg.seed == 0 and cfg.gates == DEFAULT_GATES


def test_validation_error_names_field():
    with pytest.raises(ValidationError) as e:
        parse_text('[body]\nkind = "lp"\np = 1.5\nscales = [1.0, 1.0]\n')
    assert e.value.field == "p"


def test_unknown_body_key_located():
    text = '[body]\nkind = "lp"\np = 4.0\nscales = [1.0, 1.0]\n  radius = 2.0\n'
    with pytest.raises(ParseError) as e:
        parse_text(text)
    assert (e.value.line, e.value.column) == (5, 3)


def test_unknown_config_key_and_gate():
    base = '[body]\nkind = "ellipsoid"\nQ = [[1.0, 0.0], [0.0, 1.0]]\n'
    with pytest.raises(ParseError) as e:
        parse_text(base + "[config]\nsed = 1\n")
    assert e.value.line == 5
    with pytest.raises(ParseError) as e:
        parse_text(base + "[config.gates]\nwobble = 1e-3\n")
    assert e.value.line == 5
    with pytest.raises(ParseError):
        parse_text(base + "[extra]\nx = 1\n")


def test_malformed_toml_located():
    with pytest.raises(ParseError) as e:
        parse_text('[body]\nkind = "lp"\np = = 4\n')
    assert e.value.line == 3 and e.value.column is not None


def test_config_validation():
    base = '[body]\nkind = "ellipsoid"\nQ = [[1.0, 0.0], [0.0, 1.0]]\n[config]\n'
    with pytest.raises(ValidationError) as e:
        parse_text(base + "dt = -1.0\n")
    assert e.value.field == "dt"
    with pytest.raises(ValidationError) as e:
        parse_text(base + 'tensor = "mystery"\n')
    assert e.value.field == "tensor"
    _, cfg = parse_text(base + "[config.gates]\nkakutani = 2e-4\n")
    assert cfg.gates["kakutani"] == 2e-4 and cfg.gates["nu"] == DEFAULT_GATES["nu"]


def test_exit_code_2_on_errors(tmp_path, capsys):
    bad = tmp_path / "bad.toml"
    bad.write_text('[body]\nkind = "lp"\np = 1.5\nscales = [1.0]\n')
    assert run("area", bad, tmp_path / "o1") == 2
    assert "ValidationError" in capsys.readouterr().err
    assert run("area", tmp_path / "missing.toml", tmp_path / "o2") == 2
    assert run("bogus", fixture_path("ellipsoid4"), tmp_path / "o3") == 2
    # a 3D body has no tensor subcommand
    assert run("tensor", fixture_path("revolution3"), tmp_path / "o4") == 2


def test_main_argument_errors(tmp_path):
    assert main(["area"]) == 2
    assert main(["area", "--spec", "ellipsoid4", "--gate.nu"]) == 2
    assert main(["area", "--spec", "ellipsoid4", "--gate.nu", "abc"]) == 2


def test_body_check_and_area(tmp_path):
    out = tmp_path / "bc"
    assert main(["body-check", "--spec", "revolution3", "--out", str(out)]) == 0
    rep = _report(out)
    assert rep["schema_version"] == 1 and rep["subcommand"] == "body-check"
    assert rep["result"]["midpoint_violation"] <= 1e-10
    rows = _rows(out / "boundary.csv")
    assert len(rows) > 1 and all(len(r) == len(rows[0]) for r in rows)
    out = tmp_path / "area"
    assert main(["area", "--spec", "ellipsoid4", "--out", str(out)]) == 0
    rep = _report(out)
    assert np.linalg.norm(np.abs(rep["result"]["nu"]) - np.eye(4)[3]) < 1e-5


def test_gate_override_echoed(tmp_path):
    out = tmp_path / "g"
    assert main(["area", "--spec", "ellipsoid4", "--out", str(out), "--gate.nu=3e-5"]) == 0
    assert _report(out)["config"]["gates"]["nu"] == 3e-5


def test_flow_revolution_equatorial_fixed_point(tmp_path):
    out = tmp_path / "flow"
    assert run("flow", fixture_path("revolution3"), out) == 0
    rows = _rows(out / "fixed_points.csv")
    header, data = rows[0], np.array(rows[1:], dtype=float)
    assert header[:3] == ["sigma1", "sigma2", "sigma3"]
    dirs = data[:, 3:6]
    assert np.any(np.abs(np.abs(dirs @ E3[2]) - 1.0) < 1e-6)
    # 17 significant digits survive the round trip
    assert all(len(v.replace("-", "").replace(".", "").split("e")[0].lstrip("0")) <= 17
               for v in rows[1][:3])


def test_fields_revolution(tmp_path):
    out = tmp_path / "fields"
    assert run("fields", fixture_path("revolution3"), out) == 0
    rep = _report(out)["result"]
    assert rep["euler_residual"] < 1e-14 and rep["reconstruction_error"] < 1e-10
    assert rep["degenerate_set"]["kind"] == "everything"
    assert rep["rank1"]["case"] == "LinearTimesLinear"


def test_certify_l4_exit_zero(tmp_path):
    out = tmp_path / "l4"
    assert run("certify", fixture_path("l4ball4"), out) == 0
    rep = _report(out)
    assert rep["status"] == "NOT_MONOCHROMATIC"
    assert rep["schema_version"] == 1
    rows = _rows(out / "stages.csv")
    assert rows[0][:4] == ["name", "residual", "gate", "pass"]


@pytest.mark.slow
def test_certify_ellipsoid_exit_zero(tmp_path):
    out = tmp_path / "ell"
    assert run("certify", fixture_path("ellipsoid4"), out) == 0
    assert _report(out)["status"] == "ELLIPSOID"


@pytest.mark.parametrize("args", [
    ["area", "--spec", "ellipsoid4"],
    ["certify", "--spec", "l4ball4", "--seed", "3"],
    ["flow", "--spec", "revolution3"],
])
def test_reports_byte_identical_across_processes(tmp_path, args):
    blobs = []
    for k in range(2):
        out = tmp_path / f"run{k}"
        cmd = [sys.executable, "-m", "sectionlab", *args, "--out", str(out)]
        subprocess.run(cmd, check=True, capture_output=True)
        blobs.append((out / "report.json").read_bytes())
    assert blobs[0] == blobs[1]
