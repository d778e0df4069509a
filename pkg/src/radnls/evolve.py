"""Strang-split Crank-Nicolson integrator for i u_t + Lap u = -|u|^p u."""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import splu

from .errors import InvalidArgument, SolverFailure
from .grid import (
    NormBundle,
    RadialField,
    RadialGrid,
    boundary_mass_fraction,
    norm_bundle,
)

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class EvolveConfig:
    dt: float
    t_end: float
    p: float
    snapshot_stride: int = 10
    boundary_guard: float = 0.9
    blowup_factor: float = 10.0
    nonlinear: bool = True

    def __post_init__(self):
        if not (self.dt > 0 and math.isfinite(self.dt)):
            raise InvalidArgument(f"dt must be positive, got {self.dt!r}")
        if not (self.t_end > 0 and math.isfinite(self.t_end)):
            raise InvalidArgument(f"t_end must be positive, got {self.t_end!r}")
        if int(self.snapshot_stride) != self.snapshot_stride or self.snapshot_stride < 1:
            raise InvalidArgument("snapshot_stride must be a positive integer")
        if not 0 < self.boundary_guard < 1:
            raise InvalidArgument("boundary_guard must lie in (0, 1)")
        if not self.blowup_factor > 1:
            raise InvalidArgument("blowup_factor must exceed 1")

    @property
    def n_steps(self) -> int:
        return max(1, int(round(self.t_end / self.dt)))


@dataclass
class Trajectory:
    """Snapshots of one run.  Lists are append-only while a run is in progress."""

    grid: RadialGrid
    p: float
    dt: float
    times: list = field(default_factory=list)
    snapshots: list = field(default_factory=list)
    monitors: list = field(default_factory=list)
    boundary_mass: list = field(default_factory=list)
    blowup: bool = False
    halt_time: float | None = None
    halt_reason: str = ""
    nonlinear: bool = True

    def append(self, t: float, u: RadialField, guard: float):
        self.snapshots.append(u)
        self.monitors.append(norm_bundle(u, self.p))
        self.boundary_mass.append(boundary_mass_fraction(u, guard))
        self.times.append(float(t))

    @property
    def t(self) -> np.ndarray:
        return np.asarray(self.times)

    def monitor_array(self, name: str) -> np.ndarray:
        return np.array([getattr(m, name) for m in self.monitors])

    def __len__(self):
        return len(self.times)


class CrankNicolson:
    """Cayley step (W - i dt/2 S)^{-1} (W + i dt/2 S) for u_t = i Lap u."""

    def __init__(self, grid: RadialGrid, dt: float):
        ops = grid.operators
        w = sp.diags(ops.mass_diag)
        a = ops.stiffness
        self.grid = grid
        self.dt = dt
        # u_t = i L u, L = -W^{-1} A
        self._rhs = (w - 0.5j * dt * a).tocsr()
        lhs = (w + 0.5j * dt * a).tocsc()
        try:
            self._lu = splu(lhs)
        except RuntimeError as exc:  # singular factorization
            raise SolverFailure(str(exc)) from exc

    def apply(self, values: np.ndarray) -> np.ndarray:
        out = np.zeros(self.grid.n, dtype=complex)
        out[:-1] = self._lu.solve(self._rhs @ values[:-1])
        return out


@lru_cache(maxsize=16)
def _propagator(grid: RadialGrid, dt: float) -> CrankNicolson:
    return CrankNicolson(grid, dt)


def nonlinear_phase(values: np.ndarray, tau: float, p: float) -> np.ndarray:
    """Exact flow of i u_t = -|u|^p u over time tau."""
    return values * np.exp(1j * tau * np.abs(values) ** p)


def _step_values(values, dt, p, lin: CrankNicolson, nonlinear=True):
    if nonlinear:
        values = nonlinear_phase(values, 0.5 * dt, p)
    values = lin.apply(values)
    if nonlinear:
        values = nonlinear_phase(values, 0.5 * dt, p)
    return values


def step(u: RadialField, dt: float, p: float, nonlinear: bool = True) -> RadialField:
    """One Strang step: half nonlinear phase, Crank-Nicolson, half phase."""
    vals = _step_values(u.values, dt, p, _propagator(u.grid, dt), nonlinear)
    if not np.all(np.isfinite(vals)):
        raise FloatingPointError("non-finite values after step")
    return RadialField(u.grid, vals)


def linear_propagate(f: RadialField, t: float, dt: float = 1e-3) -> RadialField:
    """Free Schroedinger evolution by Crank-Nicolson sub-steps of size <= dt.

    When ``t`` is an integer multiple of ``dt`` the sub-step equals ``dt``
    exactly, so propagating with the step used by :func:`evolve` inverts the
    linear part of that run to round-off.
    """
    if t == 0:
        return f
    if not dt > 0:
        raise InvalidArgument("dt must be positive")
    n_sub = max(1, int(math.ceil(abs(t) / dt - 1e-9)))
    tau = t / n_sub
    lin = _propagator(f.grid, tau)
    vals = np.array(f.values)
    vals[-1] = 0.0
    for _ in range(n_sub):
        vals = lin.apply(vals)
    return RadialField(f.grid, vals)


def evolve(u0: RadialField, cfg: EvolveConfig) -> Trajectory:
    """Integrate from ``u0`` to ``cfg.t_end``, recording every ``snapshot_stride`` steps.

    The run halts early, with ``blowup`` set, when ||grad u|| reaches
    ``cfg.blowup_factor`` times its initial value or a non-finite value
    appears.  The state at halt is kept as the final snapshot when finite.
    """
    grid = u0.grid
    p = cfg.p
    lin = _propagator(grid, cfg.dt)
    ops = grid.operators
    traj = Trajectory(grid=grid, p=p, dt=cfg.dt, nonlinear=cfg.nonlinear)
    vals = np.array(u0.values)
    vals[-1] = 0.0
    u = RadialField(grid, vals)
    traj.append(0.0, u, cfg.boundary_guard)
    grad0 = math.sqrt(max(ops.kinetic(vals), 0.0))
    limit = cfg.blowup_factor * grad0
    n_steps = cfg.n_steps
    for k in range(1, n_steps + 1):
        vals = _step_values(vals, cfg.dt, p, lin, cfg.nonlinear)
        t = k * cfg.dt
        if not np.all(np.isfinite(vals)):
            traj.blowup = True
            traj.halt_time = t
            traj.halt_reason = "non-finite values"
            log.info("non-finite state at t=%.6g", t)
            break
        if grad0 > 0 and math.sqrt(max(ops.kinetic(vals), 0.0)) >= limit:
            traj.blowup = True
            traj.halt_time = t
            traj.halt_reason = f"||grad u|| grew by {cfg.blowup_factor:g}x"
            traj.append(t, RadialField(grid, vals), cfg.boundary_guard)
            log.info("gradient blow-up criterion met at t=%.6g", t)
            break
        if k % cfg.snapshot_stride == 0 or k == n_steps:
            traj.append(t, RadialField(grid, vals), cfg.boundary_guard)
    return traj


@dataclass(frozen=True)
class ConservationReport:
    mass_drift: float
    energy_drift: float
    boundary_mass: float
    boundary_flag: bool

    def as_dict(self) -> dict:
        return {
            "mass_drift": self.mass_drift,
            "energy_drift": self.energy_drift,
            "boundary_mass": self.boundary_mass,
            "boundary_flag": self.boundary_flag,
        }


def energy_scale(m: NormBundle) -> float:
    """Kinetic plus potential energy, K/2 + P/(p+2).

    E itself can vanish (E(Q) = 0 at p = 2), so drifts are measured against
    the sum of its two nonnegative parts.
    """
    return max(0.5 * m.kinetic + m.potential / (m.p + 2.0), np.finfo(float).tiny)


def conservation_report(
    traj: Trajectory, boundary_threshold: float = 1e-3, upto: int | None = None
) -> ConservationReport:
    """Drifts over the first ``upto`` snapshots (all by default)."""
    if len(traj) == 0:
        raise InvalidArgument("empty trajectory")
    k = len(traj) if upto is None else max(1, min(int(upto), len(traj)))
    mass = traj.monitor_array("mass")[:k]
    energy = traj.monitor_array("energy")[:k]
    m0 = mass[0]
    mass_drift = float(np.max(np.abs(mass / m0 - 1.0))) if m0 > 0 else 0.0
    e_drift = float(np.max(np.abs(energy - energy[0])) / energy_scale(traj.monitors[0]))
    bm = float(np.max(traj.boundary_mass[:k]))
    return ConservationReport(mass_drift, e_drift, bm, bm > boundary_threshold)


def resolved_length(traj: Trajectory, factor: float) -> int:
    """Number of leading snapshots with ||grad u|| below ``factor`` times its start value."""
    kin = traj.monitor_array("kinetic")
    if kin.size == 0 or kin[0] == 0:
        return len(traj)
    bad = np.nonzero(kin > factor**2 * kin[0])[0]
    return int(bad[0]) if bad.size else len(traj)
