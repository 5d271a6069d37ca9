"""Plain-text data tables, snapshot CSV files and JSON-lines diagnostics."""

import json
import math
from pathlib import Path

import numpy as np

from .data import InitialData

__all__ = [
    "DATA_COLUMNS",
    "SNAPSHOT_COLUMNS",
    "write_data_table",
    "read_data_table",
    "write_snapshots",
    "read_snapshots",
    "write_diagnostics",
    "read_diagnostics",
    "to_jsonable",
]

DATA_COLUMNS = ["theta", "p0", "p1", "p2", "p3", "q0", "q1", "q2", "q3"]
SNAPSHOT_COLUMNS = (["time", "theta"] + [f"x{i}" for i in range(4)]
                    + [f"v{i}" for i in range(4)] + [f"w{i}" for i in range(4)]
                    + ["lam_minus", "lam_plus", "delta", "horizon_gap", "valid"])


def write_data_table(path, data, nodes=None):
    """Sample ``data`` on its uniform grid and write the table.

    Leading ``# key = value`` lines carry the extension mode, period and
    shift; the column header follows.
    """
    if data.mode == "periodic":
        n = nodes or data.nodes
        theta = np.linspace(0.0, data.period, n)
    else:
        theta = data.grid(nodes)
    p, _, q = data.evaluate(theta)
    meta = [f"name = {data.name}", f"mode = {data.mode}"]
    if data.mode == "periodic":
        meta.append(f"period = {data.period!r}")
        meta.append("shift = " + " ".join(repr(float(s)) for s in data.shift))
    if data.epsilon is not None:
        meta.append(f"epsilon = {data.epsilon!r}")
    if data.delta_hat is not None:
        meta.append(f"delta_hat = {data.delta_hat!r}")
    header = "\n".join(meta + [" ".join(DATA_COLUMNS)])
    np.savetxt(path, np.column_stack([theta, p, q]), header=header, fmt="%.17g")
    return Path(path)


def _read_meta(path):
    meta = {}
    header = None
    with open(path) as fh:
        for line in fh:
            if not line.startswith("#"):
                break
            body = line[1:].strip()
            if "=" in body:
                k, v = body.split("=", 1)
                meta[k.strip()] = v.strip()
            elif body:
                header = body.split()
    return meta, header


def read_data_table(path):
    """Build :class:`InitialData` from a table written by :func:`write_data_table`.

    The grid must be uniform; ``p'`` comes from the cubic spline of ``p``.
    """
    meta, header = _read_meta(path)
    if header != DATA_COLUMNS:
        raise ValueError(f"{path}: expected columns {' '.join(DATA_COLUMNS)}")
    table = np.loadtxt(path, ndmin=2)
    if table.shape[1] != 9:
        raise ValueError(f"{path}: expected 9 columns, found {table.shape[1]}")
    theta, p, q = table[:, 0], table[:, 1:5], table[:, 5:9]
    kw = {"name": meta.get("name", Path(path).stem)}
    for key in ("epsilon", "delta_hat"):
        if key in meta:
            kw[key] = float(meta[key])
    mode = meta.get("mode", "open")
    if mode == "periodic":
        kw["period"] = float(meta["period"])
        if "shift" in meta:
            kw["shift"] = np.array([float(s) for s in meta["shift"].split()])
    return InitialData.from_samples(theta, p, q, mode=mode, **kw)


def write_snapshots(path, result, stride=1):
    """All snapshots of ``result`` as one CSV, nodes subsampled by ``stride``."""
    rows = []
    for s in result.snapshots:
        sl = slice(None, None, stride)
        n = len(s.theta[sl])
        rows.append(np.column_stack([
            np.full(n, s.time), s.theta[sl], s.x[sl], s.v[sl], s.w[sl],
            s.lam_minus[sl], s.lam_plus[sl], s.delta[sl], s.horizon_gap[sl],
            s.valid[sl].astype(float)]))
    table = np.concatenate(rows) if rows else np.zeros((0, len(SNAPSHOT_COLUMNS)))
    header = (f"chart = {result.chart}\nsolver = {result.solver}\n"
              + ",".join(SNAPSHOT_COLUMNS))
    np.savetxt(path, table, delimiter=",", header=header, fmt="%.17g")
    return Path(path)


def read_snapshots(path):
    """``(meta, table)`` with ``table`` a dict of column arrays."""
    meta = {}
    with open(path) as fh:
        for line in fh:
            if not line.startswith("#"):
                break
            body = line[1:].strip()
            if "=" in body:
                k, v = body.split("=", 1)
                meta[k.strip()] = v.strip()
    table = np.loadtxt(path, delimiter=",", ndmin=2)
    return meta, {c: table[:, i] for i, c in enumerate(SNAPSHOT_COLUMNS)}


def to_jsonable(obj):
    """Recursively convert numpy scalars/arrays and enums for ``json``.

    Non-finite floats become the strings ``"inf"``, ``"-inf"``, ``"nan"``.
    """
    if isinstance(obj, dict):
        return {str(k): to_jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [to_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [to_jsonable(v) for v in obj.tolist()]
    if hasattr(obj, "value") and isinstance(getattr(obj, "value"), str):
        return obj.value
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer, int)):
        return int(obj)
    if isinstance(obj, (np.floating, float)):
        x = float(obj)
        return x if math.isfinite(x) else str(x)
    if obj is None or isinstance(obj, str):
        return obj
    return str(obj)


def write_diagnostics(path, records, append=False):
    """One JSON object per line."""
    with open(path, "a" if append else "w") as fh:
        for rec in records:
            fh.write(json.dumps(to_jsonable(rec), sort_keys=True) + "\n")
    return Path(path)


def read_diagnostics(path):
    with open(path) as fh:
        return [json.loads(line) for line in fh if line.strip()]
