"""Versioned JSON artifacts, problem configs and run manifests."""

from __future__ import annotations

import csv
import hashlib
import io
import json
import platform
from pathlib import Path

import numpy as np

from .conformal import ModelManifold
from .fields import TrigField
from .grids import read_grid_field
from .solver import ProblemSpec, manufactured_psi
from .symmetric import SymmetricFunctionSpec

SCHEMA = "ccl/1"


class ConfigError(ValueError):
    pass


def _default(o):
    if isinstance(o, np.generic):
        return o.item()
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, (set, tuple)):
        return list(o)
    if hasattr(o, "value"):
        return o.value
    raise TypeError(f"cannot serialize {type(o).__name__}")


def dumps(obj) -> str:
    """Deterministic JSON: sorted keys, repr-exact floats, schema tag on dicts."""
    if isinstance(obj, dict) and "schema" not in obj:
        obj = {"schema": SCHEMA, **obj}
    return json.dumps(obj, sort_keys=True, indent=2, default=_default, allow_nan=True) + "\n"


def write_json(path, obj):
    Path(path).write_text(dumps(obj))


def read_json(path):
    p = Path(path)
    if not p.is_file():
        raise ConfigError(f"{path}: file not found")
    try:
        data = json.loads(p.read_text())
    except json.JSONDecodeError as e:
        raise ConfigError(f"{path}: invalid JSON ({e})") from e
    if isinstance(data, dict) and data.get("schema", SCHEMA) != SCHEMA:
        raise ConfigError(f"{path}: unsupported schema {data.get('schema')!r}")
    return data


def csv_text(rows, columns=None) -> str:
    rows = list(rows)
    columns = columns or (list(rows[0].keys()) if rows else [])
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=columns, lineterminator="\n")
    w.writeheader()
    for r in rows:
        w.writerow({k: (repr(v) if isinstance(v, float) else v) for k, v in r.items()})
    return buf.getvalue()


def write_csv(path, rows, columns=None):
    Path(path).write_text(csv_text(rows, columns))


def sha256_file(path):
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def manifest(out_dir, inputs, seed, command, wall_time=None, artifacts=None):
    """Hashes of inputs and artifacts; wall time lives in a separate file.

    ``artifacts`` names the files written by this run; by default every file
    under ``out_dir`` except the manifest and timing files is hashed.
    """
    out = Path(out_dir)
    if artifacts is None:
        arts = sorted(p for p in out.rglob("*") if p.is_file() and p.name not in ("manifest.json", "timing.json"))
    else:
        arts = sorted(out / a for a in artifacts)
    body = {
        "command": command,
        "seed": seed,
        "inputs": {str(p): sha256_file(p) for p in inputs},
        "artifacts": {str(p.relative_to(out)): sha256_file(p) for p in arts},
        "versions": {
            "python": platform.python_version(),
            "numpy": np.__version__,
            "scipy": __import__("scipy").__version__,
        },
    }
    write_json(out / "manifest.json", body)
    if wall_time is not None:
        write_json(out / "timing.json", {"wall_time_s": wall_time})
    return body


# -- problem configs -------------------------------------------------------------


def _scalar_field(spec, manifold: ModelManifold, base_dir):
    """Sample a scalar field spec: number, {"kind": "constant" | "field" | "grid_file"}."""
    grid = manifold.grid
    if isinstance(spec, (int, float)):
        return np.full(grid.shape, float(spec))
    kind = spec.get("kind")
    if kind == "constant":
        return np.full(grid.shape, float(spec["value"]))
    if kind == "field":
        return TrigField.parse(spec["field"]).on(grid)[0]
    if kind == "grid_file":
        dims, _, ncomp, data = read_grid_field(Path(base_dir) / spec["path"])
        if tuple(dims) != grid.shape or ncomp != 1:
            raise ConfigError("grid file does not match the manifold grid")
        return data
    raise ConfigError(f"unknown scalar field kind {kind!r}")


def load_problem(cfg: dict, base_dir="."):
    """Build (problem, u0, u_star or None, solver options) from a problem config."""
    try:
        man = ModelManifold.from_dict(cfg["manifold"])
        fspec = SymmetricFunctionSpec.from_dict(cfg["function"])
        tau, alpha = float(cfg["tau"]), int(cfg["alpha"])
        psi_spec = cfg["psi"]
    except KeyError as e:
        raise ConfigError(f"problem config is missing {e}") from e
    u_star = None
    if isinstance(psi_spec, dict) and psi_spec.get("kind") == "manufactured":
        psi, u_star = manufactured_psi(man, fspec, tau, alpha, psi_spec["u_star"], psi_spec.get("mode", "discrete"))
    else:
        psi = _scalar_field(psi_spec, man, base_dir)
    boundary = None
    if "boundary" in cfg:
        boundary = _scalar_field(cfg["boundary"], man, base_dir)
    elif u_star is not None and not all(man.grid.periodic):
        boundary = u_star
    problem = ProblemSpec(man, fspec, tau, alpha, psi, boundary=boundary)
    u0 = _scalar_field(cfg.get("u0", 0.0), man, base_dir)
    opts = {"tol": float(cfg.get("tol", 1e-10)), "max_iter": int(cfg.get("max_iter", 30))}
    return problem, u0, u_star, opts
