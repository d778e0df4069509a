"""Threshold classification, scaling normalisation and coercivity functionals."""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.interpolate import make_interp_spline
from scipy.optimize import bisect

from .errors import InvalidArgument, NotRescalable, UndefinedMargin
from .grid import RadialField, check_exponent, norm_bundle
from .groundstate import GroundStateProfile

LOG_LAMBDA_RANGE = (-20.0, 20.0)
LOG_LAMBDA_TOL = 1e-12


@dataclass(frozen=True)
class ThresholdReport:
    """Position of initial data relative to the ground-state thresholds.

    ``me_ratio`` is None when E(u0) < 0 and p > 2 (the mass-energy product
    is not defined there); negative-energy data is never reported as below
    threshold.
    """

    me_ratio: float | None
    kg_ratio: float
    below: bool
    e0: float | None
    negative_energy: bool = False
    trivial: bool = False

    def as_dict(self) -> dict:
        return {
            "me_ratio": self.me_ratio,
            "kg_ratio": self.kg_ratio,
            "below": self.below,
            "e0": self.e0,
            "negative_energy": self.negative_energy,
            "trivial": self.trivial,
        }


def _check_profile(p, g):
    if abs(p - g.p) > 1e-12:
        raise InvalidArgument(f"ground state computed for p={g.p}, data uses p={p}")


def kg_ratio(u: RadialField, g: GroundStateProfile) -> float:
    nb = norm_bundle(u, g.p)
    return nb.mass * nb.kinetic ** ((g.p - 2.0) / 2.0) / g.threshold_kg


def classify(u0: RadialField, p: float, g: GroundStateProfile) -> ThresholdReport:
    """Compare M^2 E^{p-2} and ||u||^2 ||grad u||^{p-2} with the ground-state values."""
    p = check_exponent(p)
    _check_profile(p, g)
    if u0.is_zero():
        return ThresholdReport(0.0, 0.0, True, 0.0, trivial=True)
    nb = norm_bundle(u0, p)
    kg = nb.mass * nb.kinetic ** ((p - 2.0) / 2.0) / g.threshold_kg
    if nb.energy < 0:
        # at p = 2 the product is M^2 E^0 and stays defined
        me = nb.mass**2 / g.threshold_me if p == 2.0 else None
        return ThresholdReport(me, kg, False, None, negative_energy=True)
    me = nb.mass**2 * nb.energy ** (p - 2.0) / g.threshold_me
    e0 = (nb.mass / nb.energy) ** (2.0 / p) * nb.energy if nb.energy > 0 else None
    return ThresholdReport(me, kg, bool(me < 1.0 and kg < 1.0), e0)


def resample(f: RadialField, lam: float) -> RadialField:
    """Values of f(lam * r) on the same grid (quintic spline, zero beyond r_max)."""
    grid = f.grid
    r = grid.nodes
    x = np.concatenate([-r[::-1], [0.0], r])
    y = np.concatenate([f.values[::-1], [f.origin_value()], f.values])
    spline = make_interp_spline(x, y, k=5)
    s = lam * r
    out = np.zeros(grid.n, dtype=complex)
    inside = s < grid.r_max
    out[inside] = spline(s[inside])
    out[-1] = 0.0
    return RadialField(grid, out)


def scale(f: RadialField, lam: float, p: float) -> RadialField:
    """The scaling symmetry f -> lam^{2/p} f(lam x)."""
    if lam == 1.0:
        return f
    return resample(f, lam) * lam ** (2.0 / p)


def rescale_to_unit(u0: RadialField, p: float) -> tuple[RadialField, float]:
    """Find lam with M(u_lam) = E(u_lam) for u_lam = lam^{2/p} u0(lam x).

    The root is bisected on log(lam) using the resampled discrete field.
    """
    p = check_exponent(p)
    nb = norm_bundle(u0, p)
    if not nb.energy > 0:
        raise NotRescalable(f"E(u0) = {nb.energy:g} must be positive to rescale")

    def gap(s):
        m = norm_bundle(scale(u0, math.exp(s), p), p)
        if m.energy <= 0 or m.mass <= 0:
            # resampling pushed everything off the grid or below resolution
            return -math.inf if s > 0 else math.inf
        return math.log(m.mass) - math.log(m.energy)

    lo_lim, hi_lim = LOG_LAMBDA_RANGE
    guess = 0.5 * math.log(nb.mass / nb.energy)
    if gap(0.0) == 0.0:
        return u0, 1.0
    width = 0.25
    while True:
        a, b = max(guess - width, lo_lim), min(guess + width, hi_lim)
        ga, gb = gap(a), gap(b)
        if ga * gb < 0:
            break
        if a == lo_lim and b == hi_lim:
            raise NotRescalable("no sign change of M - E for log(lam) in [-20, 20]")
        width *= 2.0
    s = bisect(gap, a, b, xtol=LOG_LAMBDA_TOL, rtol=4 * np.finfo(float).eps)
    lam = math.exp(s)
    return scale(u0, lam, p), lam


def coercivity_margin(f: RadialField, p: float, g: GroundStateProfile | None = None) -> float:
    """(||grad f||^2 - p/(p+2) ||f||_{p+2}^{p+2}) / ||f||_{p+2}^{p+2}."""
    p = check_exponent(p)
    nb = norm_bundle(f, p)
    if nb.potential == 0:
        raise UndefinedMargin("||f||_{p+2} = 0")
    return (nb.kinetic - p / (p + 2.0) * nb.potential) / nb.potential


@dataclass(frozen=True)
class TrajectoryCoercivity:
    min_margin: float
    initial_margin: float
    margins: np.ndarray
    violation: bool
    initial_ok: bool

    def as_dict(self) -> dict:
        return {
            "min_margin": self.min_margin,
            "initial_margin": self.initial_margin,
            "violation": self.violation,
            "initial_ok": self.initial_ok,
        }


def coercivity_trajectory_check(
    traj: Sequence[RadialField], p: float, g: GroundStateProfile, delta: float = 0.1
) -> TrajectoryCoercivity:
    """Track 1 - kg_ratio(u(t)) along a sequence of snapshots."""
    p = check_exponent(p)
    _check_profile(p, g)
    snaps = getattr(traj, "snapshots", traj)
    margins = np.array([1.0 - kg_ratio(u, g) for u in snaps])
    init = float(margins[0])
    return TrajectoryCoercivity(
        min_margin=float(margins.min()),
        initial_margin=init,
        margins=margins,
        violation=bool(np.any(margins <= 0.0)),
        initial_ok=init >= delta,
    )
