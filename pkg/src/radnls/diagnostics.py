"""Scattering and blow-up signatures, and the end-to-end experiment pipeline."""
from __future__ import annotations

import dataclasses
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.integrate import cumulative_trapezoid

from .config import ExperimentConfig
from .errors import EstimateNotApplicable, InsufficientData, RadNLSError, WeightOverflow
from .evolve import (
    ConservationReport,
    EvolveConfig,
    Trajectory,
    conservation_report,
    evolve,
    linear_propagate,
    resolved_length,
)
from .grid import RadialField, RadialGrid, h1_norm, lp_power, make_grid
from .groundstate import GroundStateProfile, default_grid, shoot_ground_state
from .morawetz import MorawetzSeries, spacetime_estimate
from .variational import ThresholdReport, classify, coercivity_trajectory_check, rescale_to_unit
from . import serialize

log = logging.getLogger(__name__)

SCATTERING = "scattering-consistent"
BLOWUP = "blow-up"
INCONCLUSIVE = "inconclusive"
EXIT_CODES = {SCATTERING: 0, BLOWUP: 2, INCONCLUSIVE: 3}

# r_max below which the ground state is computed on its own default grid
GS_MIN_RADIUS = 20.0


def _tail_indices(traj: Trajectory, window: float, profiles: int) -> np.ndarray:
    t = traj.t
    idx = np.nonzero(t >= (1.0 - window) * t[-1])[0]
    if idx.size < 3:
        raise InsufficientData(f"{idx.size} snapshots in the tail window, need at least 3")
    # equal spacing keeps the increments comparable with each other
    stride = max(1, (idx.size - 1) // (profiles - 1))
    return idx[::stride][:profiles]


def scattering_metric(traj: Trajectory, window: float = 0.5, profiles: int = 9) -> np.ndarray:
    """H^1 increments d_k = ||v_{k+1} - v_k|| of v_k = e^{-i t_k Lap} u(t_k).

    Profiles are taken at up to ``profiles`` snapshots spread over the last
    ``window`` fraction of the run.  The discrete propagator is a group that
    preserves the discrete H^1 norm, so d_k is evaluated as
    ||u(t_{k+1}) - e^{i (t_{k+1} - t_k) Lap} u(t_k)|| without propagating
    each profile back to t = 0.
    """
    if traj.blowup:
        raise EstimateNotApplicable("trajectory halted with a blow-up flag")
    sel = _tail_indices(traj, window, profiles)
    out = []
    for a, b in zip(sel[:-1], sel[1:]):
        tau = traj.times[b] - traj.times[a]
        moved = linear_propagate(traj.snapshots[a], tau, traj.dt)
        out.append(h1_norm(traj.snapshots[b] - moved))
    return np.array(out)


@dataclass(frozen=True)
class ScatteringCheck:
    increments: np.ndarray
    total: float
    reference: float
    tolerance: float
    decreasing: bool

    @property
    def relative_total(self) -> float:
        return self.total / self.reference if self.reference > 0 else 0.0

    @property
    def consistent(self) -> bool:
        return self.decreasing and self.total < self.tolerance * self.reference

    def as_dict(self) -> dict:
        return {
            "increments": self.increments,
            "total": self.total,
            "relative_total": self.relative_total,
            "tolerance": self.tolerance,
            "decreasing": self.decreasing,
            "consistent": self.consistent,
        }


def scattering_check(
    traj: Trajectory, tolerance: float = 1e-2, window: float = 0.5, profiles: int = 9
) -> ScatteringCheck:
    """Cauchy test: increments non-increasing and summing below tolerance*||u0||_{H^1}."""
    d = scattering_metric(traj, window, profiles)
    ref = h1_norm(traj.snapshots[0])
    # increments at round-off level are noise, not growth
    floor = 1e-10 * ref
    decreasing = bool(np.all(d[1:] <= d[:-1] + floor))
    return ScatteringCheck(d, float(d.sum()), ref, tolerance, decreasing)


@dataclass(frozen=True)
class L2pAccumulation:
    times: np.ndarray
    density: np.ndarray
    cumulative: np.ndarray

    @property
    def total(self) -> float:
        return float(self.cumulative[-1]) if self.cumulative.size else 0.0

    @property
    def last_quarter_fraction(self) -> float:
        """Share of the total accumulated during the last quarter of the run."""
        if self.total == 0 or self.times.size < 2:
            return 0.0
        at = np.interp(0.75 * self.times[-1], self.times, self.cumulative)
        return float((self.total - at) / self.total)

    @property
    def saturating(self) -> bool:
        return self.last_quarter_fraction < 0.1

    def rows(self):
        return ("t", "l2p_density", "cumulative_l2p"), np.column_stack(
            [self.times, self.density, self.cumulative]
        )


def l2p_accumulation(traj: Trajectory, p: float | None = None) -> L2pAccumulation:
    """Running time integral of int |u|^{2p} dx over the recorded snapshots."""
    p = traj.p if p is None else p
    t = traj.t
    dens = np.array([lp_power(u, 2.0 * p) for u in traj.snapshots])
    cum = cumulative_trapezoid(dens, t, initial=0.0) if t.size > 1 else np.zeros(t.size)
    return L2pAccumulation(t, dens, cum)


def spacetime_2p_norm(traj: Trajectory, p: float | None = None) -> float:
    """int_0^T int |u|^{2p} dx dt by the trapezoidal rule over snapshots."""
    return l2p_accumulation(traj, p).total


@dataclass
class BlowupProbe:
    blowup: bool
    halt_time: float | None
    growth_factor: float
    halt_reason: str
    trajectory: Trajectory = field(repr=False)

    def as_dict(self) -> dict:
        return {
            "blowup": self.blowup,
            "halt_time": self.halt_time,
            "growth_factor": self.growth_factor,
            "halt_reason": self.halt_reason,
        }


def blowup_probe(u0: RadialField, p: float, cfg: EvolveConfig) -> BlowupProbe:
    if cfg.p != p:
        cfg = dataclasses.replace(cfg, p=p)
    traj = evolve(u0, cfg)
    return _probe_of(traj)


def _probe_of(traj: Trajectory) -> BlowupProbe:
    kin = traj.monitor_array("kinetic")
    growth = math.sqrt(kin.max() / kin[0]) if kin[0] > 0 else 1.0
    return BlowupProbe(traj.blowup, traj.halt_time, growth, traj.halt_reason, traj)


@dataclass
class VerdictReport:
    classification: ThresholdReport
    outcome: str
    scattering_cauchy: np.ndarray
    l2p_spacetime: float
    notes: str = ""
    conservation: ConservationReport | None = None
    probe: BlowupProbe | None = None
    scattering: ScatteringCheck | None = None
    l2p: L2pAccumulation | None = None
    morawetz: MorawetzSeries | None = None
    ground_state: GroundStateProfile | None = None
    scale: float = 1.0

    @property
    def exit_code(self) -> int:
        return EXIT_CODES[self.outcome]

    def as_dict(self) -> dict:
        out = {
            "outcome": self.outcome,
            "classification": self.classification.as_dict(),
            "scale_lambda": self.scale,
            "scattering_cauchy": self.scattering_cauchy,
            "l2p_spacetime": self.l2p_spacetime,
            "notes": self.notes,
        }
        if self.conservation is not None:
            out["conservation"] = self.conservation.as_dict()
        if self.probe is not None:
            out["blowup"] = self.probe.as_dict()
        if self.scattering is not None:
            out["scattering"] = self.scattering.as_dict()
        if self.l2p is not None:
            out["l2p_last_quarter_fraction"] = self.l2p.last_quarter_fraction
            out["l2p_saturating"] = self.l2p.saturating
        if self.morawetz is not None:
            out["morawetz"] = self.morawetz.summary()
        return out


def decide_outcome(
    blowup: bool,
    gate_ok: bool,
    scattering: ScatteringCheck | None,
    l2p: L2pAccumulation | None,
    boundary_clean: bool,
) -> str:
    """Each verdict needs its own numerical signature; threshold data is never consulted."""
    if not gate_ok:
        return INCONCLUSIVE
    if blowup:
        return BLOWUP
    if (
        scattering is not None
        and scattering.consistent
        and l2p is not None
        and l2p.saturating
        and boundary_clean
    ):
        return SCATTERING
    return INCONCLUSIVE


def initial_data(cfg: ExperimentConfig, grid: RadialGrid, g: GroundStateProfile) -> RadialField:
    if cfg.initial_data == "gaussian":
        return grid.sample(lambda r: cfg.a * np.exp(-((r / cfg.w) ** 2)))
    if cfg.initial_data == "ground_state_multiple":
        if g.grid != grid:
            g = shoot_ground_state(cfg.p, grid=grid)
        return g.field * cfg.c
    return serialize.read_profile_csv(cfg.path, grid)


def ground_state_for(cfg: ExperimentConfig, grid: RadialGrid) -> GroundStateProfile:
    """Ground state on the experiment grid when it is wide enough for the tail."""
    if cfg.initial_data == "ground_state_multiple" or grid.r_max >= GS_MIN_RADIUS:
        return shoot_ground_state(cfg.p, grid=grid)
    return shoot_ground_state(cfg.p, grid=default_grid())


class _Writer:
    """Writes outputs as soon as they exist so that a later failure keeps them."""

    def __init__(self, out: Path | None):
        self.out = out
        self.written: list[Path] = []
        if out is not None:
            out.mkdir(parents=True, exist_ok=True)

    def __call__(self, fn, name, *args):
        if self.out is None:
            return
        self.written.append(fn(self.out / name, *args))


def prepare(cfg: ExperimentConfig):
    """Grid, ground state, raw data, classification and (if below) rescaled data."""
    grid = make_grid(cfg.r_max, cfg.n)
    g = ground_state_for(cfg, grid)
    u0 = initial_data(cfg, grid, g)
    report = classify(u0, cfg.p, g)
    lam = 1.0
    if report.below and cfg.rescale and not report.trivial:
        u0, lam = rescale_to_unit(u0, cfg.p)
    return grid, g, u0, report, lam


def run_experiment(cfg: ExperimentConfig, out: str | Path | None = "config") -> VerdictReport:
    """classify -> rescale if below -> evolve -> Morawetz series -> verdict.

    ``out="config"`` writes to ``cfg.outputs``; ``None`` writes nothing.
    """
    out_dir = Path(cfg.outputs) if out == "config" else (Path(out) if out else None)
    write = _Writer(out_dir)
    notes = []
    write(lambda path: serialize.write_json(path, cfg.to_dict()), "config.json")

    grid, g, u0, report, lam = prepare(cfg)
    write(serialize.write_json, "ground_state.json", g.as_dict())
    write(serialize.write_profile_csv, "ground_state.csv", g.field)
    write(serialize.write_json, "classification.json", {**report.as_dict(), "scale_lambda": lam})
    if report.trivial:
        notes.append("zero initial data")
    if report.negative_energy:
        notes.append("E(u0) < 0, classified not below")
    if lam != 1.0:
        notes.append(f"rescaled to M = E with lambda = {lam:.12g}")

    traj = evolve(u0, cfg.evolve_config)
    probe = _probe_of(traj)
    write(serialize.write_monitors_csv, "monitors.csv", traj)
    if cfg.trajectory_format == "csv":
        write(serialize.write_trajectory_csv, "trajectory.csv", traj)
    elif cfg.trajectory_format == "binary":
        write(serialize.write_trajectory_binary, "trajectory.bin", traj)

    # drift is judged only while the profile is still resolved
    upto = resolved_length(traj, math.sqrt(cfg.blowup_factor)) if traj.blowup else None
    cons = conservation_report(traj, cfg.boundary_threshold, upto)
    gate_ok = cons.mass_drift < cfg.mass_tolerance and cons.energy_drift < cfg.energy_tolerance
    if not gate_ok:
        notes.append(
            f"conservation gate failed: mass drift {cons.mass_drift:.3g}, "
            f"energy drift {cons.energy_drift:.3g}"
        )
    if cons.boundary_flag:
        notes.append(f"boundary mass {cons.boundary_mass:.3g} exceeds {cfg.boundary_threshold:g}")
    if traj.blowup:
        notes.append(f"halted at t = {traj.halt_time:.6g}: {traj.halt_reason}")

    l2p = l2p_accumulation(traj)
    write(lambda path: serialize.write_table(path, *l2p.rows()), "l2p.csv")

    scat = series = None
    if not traj.blowup:
        try:
            scat = scattering_check(
                traj, cfg.scattering_tolerance, cfg.scattering_window, cfg.scattering_profiles
            )
        except InsufficientData as exc:
            notes.append(f"scattering metric unavailable: {exc}")
        try:
            series = spacetime_estimate(traj, cfg.R_policy, cfg.p, cfg.R, cfg.fit_window)
        except (WeightOverflow, EstimateNotApplicable) as exc:
            notes.append(f"Morawetz series unavailable: {exc}")
    if scat is not None:
        write(
            lambda path: serialize.write_table(
                path, ("k", "d_k"), np.column_stack([np.arange(scat.increments.size), scat.increments])
            ),
            "scattering.csv",
        )
    if series is not None:
        write(lambda path: serialize.write_table(path, *series.rows()), "morawetz.csv")
        write(serialize.write_json, "morawetz.json", series.summary())
        if not series.normalized:
            notes.append("Morawetz series on data not normalized to M = E")
    if report.below and not report.trivial:
        coer = coercivity_trajectory_check(traj, cfg.p, g)
        if coer.violation:
            notes.append("kg ratio reached 1 along the run")

    outcome = decide_outcome(traj.blowup, gate_ok, scat, l2p, not cons.boundary_flag)
    verdict = VerdictReport(
        classification=report,
        outcome=outcome,
        scattering_cauchy=scat.increments if scat is not None else np.array([]),
        l2p_spacetime=l2p.total,
        notes="; ".join(notes),
        conservation=cons,
        probe=probe,
        scattering=scat,
        l2p=l2p,
        morawetz=series,
        ground_state=g,
        scale=lam,
    )
    write(serialize.write_json, "verdict.json", verdict.as_dict())
    log.info("%s: %s", cfg.name, outcome)
    return verdict


def run_safely(cfg: ExperimentConfig, out="config") -> tuple[int, VerdictReport | None, str]:
    """(exit code, verdict, error message) with library errors mapped to code 1."""
    try:
        v = run_experiment(cfg, out)
    except (RadNLSError, OSError, FloatingPointError) as exc:
        return 1, None, f"{type(exc).__name__}: {exc}"
    return v.exit_code, v, ""
