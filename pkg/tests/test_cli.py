import io as _io
import json
import subprocess
import sys

import numpy as np
import pytest

from glmavg import cli
from glmavg import experiments as ex
from glmavg import io


def write_cfg(tmp_path, cfg, name="cfg.json"):
    p = tmp_path / name
    p.write_text(json.dumps(cfg))
    return p


def run(tmp_path, cfg, out="out"):
    buf = _io.StringIO()
    code = cli.run(write_cfg(tmp_path, cfg), tmp_path / out, stream=buf)
    return code, buf.getvalue(), tmp_path / out


def report(out):
    return json.loads((out / "report.json").read_text())


# --------------------------------------------------------------------------- list

def test_list_shows_all_kinds(capsys):
    assert cli.main(["list"]) == 0
    text = capsys.readouterr().out
    assert len(ex.KINDS) == 8
    for kind in ex.KINDS:
        assert kind in text
    assert text.count("anchor:") == 8


@pytest.mark.parametrize("kind", list(ex.KINDS))
def test_sample_config_reparses(kind, capsys):
    assert cli.main(["list", "--sample", kind]) == 0
    cfg = json.loads(capsys.readouterr().out)
    parsed = ex.parse_config(cfg)
    assert parsed["kind"] == kind and parsed["_cases"]


# --------------------------------------------------------------------------- config errors

def test_unknown_key_is_config_error(tmp_path):
    code, _, _ = run(tmp_path, {"kind": "solve", "preset": "zero", "colour": "blue"})
    assert code == cli.EXIT_CONFIG


def test_bad_json_is_config_error(tmp_path):
    p = tmp_path / "bad.json"
    p.write_text("{kind: solve")
    assert cli.run(p, tmp_path / "out", stream=_io.StringIO()) == cli.EXIT_CONFIG
    assert cli.run(tmp_path / "missing.json", tmp_path / "out", stream=_io.StringIO()) == cli.EXIT_CONFIG


@pytest.mark.parametrize("bad", [{"eps": -0.1}, {"dt": 0}, {"kind": "nope"}, {"checks": ["no-such-check"]},
                                 {"manifold": "T3"}, {"manifold": "T2"}])
def test_invalid_values_rejected(bad):
    cfg = {"kind": "solve", "preset": "zero", **bad}
    with pytest.raises(ex.ConfigError):
        ex.parse_config(cfg)


# --------------------------------------------------------------------------- runs

def test_zero_preset_solve(tmp_path):
    code, text, out = run(tmp_path, {"kind": "solve", "preset": "zero", "N": 32, "horizon": 0.1, "dt": 1e-2,
                                     "save_every": 5})
    assert code == cli.EXIT_PASS
    assert "PASS" in text
    header, data = io.read_table(out / "diagnostics.csv")
    assert np.all(data[:, 1:] == 0.0)
    rep = report(out)
    assert rep["pass"] and all({"name", "measured", "bound", "pass", "anchor"} <= set(c) for c in rep["checks"])
    timings = json.loads((out / "timings.json").read_text())
    assert "total" in timings


def test_verify_geometry_torus(tmp_path):
    code, _, out = run(tmp_path, {"kind": "verify-geometry", "manifold": "T2", "resolution": 64})
    assert code == cli.EXIT_PASS
    checks = {c["name"]: c for c in report(out)["checks"]}
    assert checks["green-shear"]["measured"] <= 1e-8
    assert checks["green-deformation"]["measured"] <= 1e-8


def test_average_lagrangian_shear(tmp_path):
    code, _, out = run(tmp_path, {"kind": "average-lagrangian", "preset": "shear", "eps": 1e-2})
    assert code == cli.EXIT_PASS
    rep = report(out)
    checks = {c["name"]: c for c in rep["checks"]}
    assert checks["empirical-finite-eps"]["measured"] <= 1e-3
    assert (out / "lagrangian.csv").read_text().startswith("eps,mode,")


def test_determinism(tmp_path):
    cfg = {"kind": "ensemble-stats", "manifold": "T2", "resolution": 8, "N_ladder": [16, 32, 64], "replicates": 2}
    _, _, a = run(tmp_path, cfg, "a")
    _, _, b = run(tmp_path, cfg, "b")
    files = sorted(p.name for p in a.iterdir() if p.name != "timings.json")
    assert "report.json" in files and any(f.endswith(".csv") for f in files)
    for f in files:
        assert (a / f).read_bytes() == (b / f).read_bytes(), f


def test_check_failure_exit_code(tmp_path):
    code, text, out = run(tmp_path, {"kind": "verify-geometry", "manifold": "T2", "resolution": 16,
                                     "checks": ["green-shear"], "tolerances": {"green-shear": 1e-300}})
    assert code == cli.EXIT_FAIL
    assert "FAIL" in text and not report(out)["pass"]


def test_runtime_error_exit_code(tmp_path):
    code, text, out = run(tmp_path, {"kind": "solve", "preset": "sine", "N": 256, "eps": 0.5, "dt": 5.0,
                                     "horizon": 10.0})
    assert code == cli.EXIT_RUNTIME
    assert "errors" in report(out)


def test_cases_prefix_names(tmp_path):
    cfg = {"kind": "solve", "name": "two", "cases": [
        {"name": "a", "preset": "zero", "N": 16, "horizon": 0.05, "dt": 1e-2},
        {"name": "b", "preset": "zero", "N": 32, "horizon": 0.05, "dt": 1e-2}]}
    code, _, out = run(tmp_path, cfg)
    assert code == cli.EXIT_PASS
    names = [c["name"] for c in report(out)["checks"]]
    assert any(n.startswith("a/") for n in names) and any(n.startswith("b/") for n in names)
    assert (out / "a" / "diagnostics.csv").exists()


def test_module_entry_point(tmp_path):
    p = write_cfg(tmp_path, {"kind": "solve", "preset": "zero", "N": 16, "horizon": 0.05, "dt": 1e-2})
    res = subprocess.run([sys.executable, "-m", "glmavg", "run", str(p), "--out", str(tmp_path / "o")],
                         capture_output=True, text=True)
    assert res.returncode == 0, res.stderr
    assert (tmp_path / "o" / "report.json").exists()
