import json

import numpy as np
import pytest

from glmavg import diffeo as dg
from glmavg import ensemble as en
from glmavg import io
from glmavg.geometry import circle, sphere, torus
from glmavg.geometry.testfields import random_trig_field


@pytest.mark.parametrize("m", [circle(16), torus(8, 6), sphere(6)])
def test_field_round_trip(tmp_path, m):
    u = random_trig_field(m, 0)
    io.write_field(tmp_path / "u.csv", u)
    back = io.read_field(tmp_path / "u.csv", m)
    assert np.array_equal(back.values, u.values)


def test_field_csv_layout(tmp_path):
    m = torus(4)
    io.write_field(tmp_path / "u.csv", random_trig_field(m, 1))
    header, data = io.read_table(tmp_path / "u.csv")
    assert header == ["node", "x", "y", "u0", "u1"]
    assert data.shape == (16, 5)
    assert np.array_equal(data[:, 0], np.arange(16))


def test_diffeo_round_trip(tmp_path):
    m = torus(16)
    phi = dg.Diffeo.from_displacement(m, lambda X: 0.2 * np.stack([np.sin(X[1]), np.cos(X[0])]))
    io.write_diffeo(tmp_path / "phi.csv", phi)
    back = io.read_diffeo(tmp_path / "phi.csv", m)
    assert np.array_equal(back.disp, phi.disp)


def test_ensemble_round_trip(tmp_path):
    ens = en.random_isotropic(torus(8), 4, seed=9)
    io.write_ensemble(tmp_path / "ens", ens)
    back = io.read_ensemble(tmp_path / "ens")
    assert back.seed == 9 and len(back.members) == 4
    assert all(np.array_equal(a.values, b.values) for a, b in zip(ens.members, back.members))
    assert np.array_equal(back.weights, ens.weights)


def test_json_is_deterministic(tmp_path):
    obj = {"b": np.float64(0.1), "a": [np.int64(3), np.array([1.5, 2.0])], "ok": np.bool_(True), "bad": float("nan")}
    a = io.write_json(tmp_path / "a.json", obj).read_bytes()
    b = io.write_json(tmp_path / "b.json", dict(reversed(list(obj.items())))).read_bytes()
    assert a == b
    loaded = json.loads(a)
    assert loaded == {"a": [3, [1.5, 2.0]], "b": 0.1, "bad": "nan", "ok": True}


def test_table_round_trip(tmp_path):
    rows = [[1, 0.1, 1e-17], [2, np.float64(np.pi), -3.0]]
    io.write_table(tmp_path / "t.csv", ["k", "a", "b"], rows)
    header, data = io.read_table(tmp_path / "t.csv")
    assert header == ["k", "a", "b"]
    assert data[1, 1] == np.pi and data[0, 2] == 1e-17
