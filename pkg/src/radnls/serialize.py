"""CSV, JSON and binary records for trajectories and summaries.

Binary trajectory layout (little-endian)::

    int64   n
    float64 r_max, p, dt
    repeated: float64 t, then n float64 Re u, then n float64 Im u

The header is followed by one record per snapshot until end of file.
"""
from __future__ import annotations

import csv
import json
import math
from pathlib import Path

import numpy as np
from scipy.interpolate import CubicSpline

from .errors import InvalidArgument
from .evolve import Trajectory
from .grid import RadialField, RadialGrid, make_grid

_HEADER = np.dtype([("n", "<i8"), ("r_max", "<f8"), ("p", "<f8"), ("dt", "<f8")])


def _clean(obj):
    """Make ``obj`` JSON-safe: numpy scalars to Python, non-finite floats to None."""
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _clean(obj.tolist())
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer, int)):
        return int(obj)
    if isinstance(obj, (np.floating, float)):
        x = float(obj)
        return x if math.isfinite(x) else None
    return obj


def write_json(path, data: dict) -> Path:
    path = Path(path)
    path.write_text(json.dumps(_clean(data), indent=2) + "\n")
    return path


def write_table(path, header, rows) -> Path:
    path = Path(path)
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for row in np.asarray(rows):
            writer.writerow([repr(float(x)) for x in row])
    return path


def read_table(path) -> tuple[list[str], np.ndarray]:
    with Path(path).open(newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        data = np.array([[float(x) for x in row] for row in reader if row])
    return header, data.reshape(-1, len(header))


def write_profile_csv(path, f: RadialField, column: str = "Q") -> Path:
    r = f.grid.nodes
    if np.any(f.values.imag != 0):
        return write_table(path, ("r", f"Re {column}", f"Im {column}"),
                           np.column_stack([r, f.values.real, f.values.imag]))
    return write_table(path, ("r", column), np.column_stack([r, f.values.real]))


def read_profile_csv(path, grid: RadialGrid | None = None) -> RadialField:
    """Load (r, value[, imag]) columns; resample onto ``grid`` if given."""
    _, data = read_table(path)
    r = data[:, 0]
    vals = data[:, 1] + (1j * data[:, 2] if data.shape[1] > 2 else 0.0)
    if grid is None:
        h = r[1] - r[0] if r.size > 1 else r[0]
        if not np.allclose(r, h * np.arange(1, r.size + 1), rtol=1e-9, atol=1e-12):
            raise InvalidArgument("profile nodes are not of the form k*h; pass a grid")
        grid = make_grid(float(r[-1]), r.size)
        out = vals.astype(complex)
    else:
        # even extension keeps u'(0) = 0 when resampling below the first node
        spline = CubicSpline(np.concatenate([-r[::-1], r]), np.concatenate([vals[::-1], vals]))
        out = np.where(grid.nodes <= r[-1], spline(np.minimum(grid.nodes, r[-1])), 0.0)
    out[-1] = 0.0
    return RadialField(grid, out)


def write_monitors_csv(path, traj: Trajectory) -> Path:
    header = ("t", "mass", "kinetic", "potential", "energy", "boundary_mass")
    rows = [
        (t, m.mass, m.kinetic, m.potential, m.energy, b)
        for t, m, b in zip(traj.times, traj.monitors, traj.boundary_mass)
    ]
    return write_table(path, header, np.array(rows).reshape(-1, len(header)))


def write_trajectory_csv(path, traj: Trajectory) -> Path:
    path = Path(path)
    r = traj.grid.nodes
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(("t", "r", "Re u", "Im u"))
        for t, u in zip(traj.times, traj.snapshots):
            for rk, v in zip(r, u.values):
                writer.writerow((repr(float(t)), repr(float(rk)), repr(float(v.real)), repr(float(v.imag))))
    return path


def write_trajectory_binary(path, traj: Trajectory) -> Path:
    path = Path(path)
    header = np.array([(traj.grid.n, traj.grid.r_max, traj.p, traj.dt)], dtype=_HEADER)
    with path.open("wb") as fh:
        fh.write(header.tobytes())
        for t, u in zip(traj.times, traj.snapshots):
            rec = np.concatenate([[t], u.values.real, u.values.imag]).astype("<f8")
            fh.write(rec.tobytes())
    return path


def read_trajectory_binary(path) -> tuple[dict, np.ndarray, np.ndarray]:
    """Return (header, times, values) with values of shape (snapshots, n) complex."""
    raw = Path(path).read_bytes()
    if len(raw) < _HEADER.itemsize:
        raise InvalidArgument(f"{path}: truncated header")
    head = np.frombuffer(raw[: _HEADER.itemsize], dtype=_HEADER)[0]
    n = int(head["n"])
    body = np.frombuffer(raw[_HEADER.itemsize :], dtype="<f8")
    width = 2 * n + 1
    if body.size % width:
        raise InvalidArgument(f"{path}: record length does not match n={n}")
    recs = body.reshape(-1, width)
    values = recs[:, 1 : n + 1] + 1j * recs[:, n + 1 :]
    header = {"n": n, "r_max": float(head["r_max"]), "p": float(head["p"]), "dt": float(head["dt"])}
    return header, recs[:, 0].copy(), values
