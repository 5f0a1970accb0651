"""CSV and JSON serialization of fields, maps, ensembles and tables.

Node CSVs have one row per grid node in C order: ``node`` (flat index), the
node coordinates, then the components. JSON is written with sorted keys and
a fixed float format so identical inputs give identical bytes.
"""
from __future__ import annotations

import csv
import json
import math
from pathlib import Path

import numpy as np

from .diffeo import Diffeo
from .ensemble import FluctuationEnsemble
from .geometry.fields import VectorField
from .geometry.manifold import Manifold, ManifoldKind, make_manifold

FLOAT_FMT = "{:.17g}"
_COORDS = {ManifoldKind.CIRCLE: ["x"], ManifoldKind.TORUS: ["x", "y"], ManifoldKind.SPHERE: ["px", "py", "pz"]}


def _fmt(v):
    if isinstance(v, (float, np.floating)):
        return FLOAT_FMT.format(float(v))
    return str(v)


def write_table(path, header, rows):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as fh:
        wr = csv.writer(fh, lineterminator="\n")
        wr.writerow(header)
        for r in rows:
            wr.writerow([_fmt(v) for v in r])
    return path


def read_table(path):
    with Path(path).open(newline="") as fh:
        rd = csv.reader(fh)
        header = next(rd)
        rows = [[float(v) for v in r] for r in rd]
    return header, np.array(rows, dtype=float).reshape(len(rows), len(header))


def _node_rows(m: Manifold, columns):
    coords = m.nodes.reshape(m.nodes.shape[0], -1)
    cols = [c.reshape(-1) for c in columns]
    for i in range(m.size):
        yield [i, *coords[:, i], *(c[i] for c in cols)]


def write_field(path, field: VectorField, prefix: str = "u"):
    m = field.manifold
    names = [f"{prefix}{i}" for i in range(m.ncomp)] if m.ncomp > 1 else [prefix]
    return write_table(path, ["node", *_COORDS[m.kind], *names], _node_rows(m, list(field.values)))


def read_field(path, m: Manifold) -> VectorField:
    header, data = read_table(path)
    start = 1 + len(_COORDS[m.kind])
    vals = data[:, start:start + m.ncomp].T.reshape((m.ncomp,) + m.shape)
    return VectorField(m, vals)


def write_diffeo(path, phi: Diffeo):
    m = phi.manifold
    comps = list(phi.image) + list(phi.disp)
    names = [f"image_{c}" for c in _COORDS[m.kind]] + [f"disp_{c}" for c in _COORDS[m.kind]]
    return write_table(path, ["node", *_COORDS[m.kind], *names], _node_rows(m, comps))


def read_diffeo(path, m: Manifold) -> Diffeo:
    header, data = read_table(path)
    start = 1 + 2 * len(_COORDS[m.kind])
    disp = data[:, start:start + m.ncomp].T.reshape((m.ncomp,) + m.shape)
    return Diffeo(m, disp)


def dumps(obj) -> str:
    return json.dumps(_clean(obj), indent=2, sort_keys=True, ensure_ascii=False) + "\n"


def _clean(obj):
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _clean(obj.tolist())
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        if math.isnan(v) or math.isinf(v):
            return str(v)
        return float(FLOAT_FMT.format(v))
    return obj


def write_json(path, obj):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(dumps(obj), encoding="utf-8")
    return path


def write_ensemble(directory, ens: FluctuationEnsemble):
    """One CSV per member plus ``manifest.json``."""
    d = Path(directory)
    d.mkdir(parents=True, exist_ok=True)
    files = []
    for i, w in enumerate(ens.members):
        name = f"member_{i:04d}.csv"
        write_field(d / name, w, "w")
        files.append(name)
    manifest = ens.manifest()
    manifest["files"] = files
    write_json(d / "manifest.json", manifest)
    return d


def read_ensemble(directory) -> FluctuationEnsemble:
    d = Path(directory)
    man = json.loads((d / "manifest.json").read_text())
    m = make_manifold(man["manifold"]["kind"], man["manifold"]["resolution"])
    members = [read_field(d / f, m) for f in man["files"]]
    return FluctuationEnsemble(m, tuple(members), np.asarray(man["weights"]), man["amplitude"],
                               man["tag"], man["seed"])
