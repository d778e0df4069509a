"""Localized virial/Morawetz instrumentation.

The cutoff phi is the C^3 smoothstep 1 - t^4 (35 - 84 t + 70 t^2 - 20 t^3),
t = s - 1, on 1 <= s <= 2.  The companion weight is psi(s) = s^{-1} int_0^s phi,
so that s psi'(s) = phi(s) - psi(s).  For radial u the Morawetz action is

    A(t) = int psi(r/R) r Im(conj(u) u_r) dx

and its exact rate is

    dA/dt = 2 int phi |u_r|^2 - p/(p+2) int (psi + phi) |u|^{p+2}
            - 1/(2 R^2) int [phi'' + (2 phi' - psi')/s] |u|^2.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np
from scipy.integrate import cumulative_trapezoid, trapezoid

from .errors import EstimateNotApplicable, InvalidArgument, WeightOverflow
from .evolve import Trajectory
from .grid import RadialField, RadialGrid, lp_power, norm_bundle, radial_derivative
from .groundstate import GroundStateProfile

# int_0^2 phi(s) ds; psi(s) = PSI_TAIL / s for s >= 2
PSI_TAIL = 1.5
# |psi - phi| <= TAIL_CONST / s for s > 1
TAIL_CONST = 2.0


def smoothstep(s):
    """phi(s) and its first two derivatives."""
    s = np.asarray(s, dtype=float)
    t = np.clip(s - 1.0, 0.0, 1.0)
    phi = 1.0 - t**4 * (35.0 - 84.0 * t + 70.0 * t**2 - 20.0 * t**3)
    phi_d = -140.0 * t**3 * (1.0 - t) ** 3
    phi_dd = -420.0 * t**2 * (1.0 - t) ** 2 * (1.0 - 2.0 * t)
    return phi, phi_d, phi_dd


def psi_weight(s):
    """psi(s) = s^{-1} int_0^s phi(rho) d rho, evaluated in closed form."""
    s = np.asarray(s, dtype=float)
    t = np.clip(s - 1.0, 0.0, 1.0)
    integral = np.where(
        s <= 1.0, s, 1.0 + t - 7.0 * t**5 + 14.0 * t**6 - 10.0 * t**7 + 2.5 * t**8
    )
    with np.errstate(divide="ignore", invalid="ignore"):
        return np.where(s > 0, integral / np.where(s > 0, s, 1.0), 1.0)


def chi_laplacian(s):
    """R^2 chi Lap chi for chi = sqrt(phi), as a function of s = r/R."""
    phi, phi_d, phi_dd = smoothstep(s)
    with np.errstate(divide="ignore", invalid="ignore"):
        val = 0.5 * phi_dd - 0.25 * phi_d**2 / phi + 0.5 * phi_d / s
    return np.where(phi > 0, val, 0.0)


@dataclass(frozen=True, eq=False)
class WeightPair:
    R: float
    s: np.ndarray
    phi: np.ndarray
    psi: np.ndarray
    phi_d: np.ndarray
    phi_dd: np.ndarray
    psi_d: np.ndarray
    grid: RadialGrid = field(repr=False)


def make_weights(R: float, grid: RadialGrid) -> WeightPair:
    if not R >= 1:
        raise InvalidArgument(f"R must be >= 1, got {R!r}")
    if 2 * R >= grid.r_max:
        raise WeightOverflow(f"2R = {2 * R:g} does not fit inside r_max = {grid.r_max:g}")
    s = grid.nodes / R
    phi, phi_d, phi_dd = smoothstep(s)
    psi = psi_weight(s)
    psi_d = (phi - psi) / s
    return WeightPair(float(R), s, phi, psi, phi_d, phi_dd, psi_d, grid)


def morawetz_action(u: RadialField, w: WeightPair) -> float:
    ur = radial_derivative(u)
    dens = w.psi * u.grid.nodes * np.imag(np.conj(u.values) * ur)
    return float(u.grid.integrate(dens))


class RateTerms(NamedTuple):
    gradient_term: float
    potential_term: float
    error_budget: float


@dataclass(frozen=True)
class RateDetails:
    gradient_term: float
    potential_term: float
    error_budget: float
    weight_term: float
    tail_bound: float
    tail_exact: float
    rate_coercive: float
    local_potential: float

    @property
    def rate_exact(self) -> float:
        return self.gradient_term - self.potential_term + self.weight_term


def rate_details(u: RadialField, w: WeightPair, p: float) -> RateDetails:
    grid = u.grid
    R = w.R
    ur2 = np.abs(radial_derivative(u)) ** 2
    dens = np.abs(u.values) ** 2
    pot = dens ** (0.5 * (p + 2.0))
    c = p / (p + 2.0)
    gradient = 2.0 * grid.integrate(w.phi * ur2)
    potential = c * grid.integrate((w.psi + w.phi) * pot)
    lap_w = w.phi_dd + (2.0 * w.phi_d - w.psi_d) / w.s
    weight_term = -0.5 / R**2 * grid.integrate(lap_w * dens)
    tail_exact = c * grid.integrate((w.psi - w.phi) * pot)
    outside = grid.nodes > R
    if outside.any():
        sup = float(np.max(np.sqrt(grid.nodes[outside]) * np.sqrt(dens[outside])))
    else:
        sup = 0.0
    mass = grid.integrate(dens)
    tail_bound = c * TAIL_CONST * R ** (-0.5 * p) * sup**p * mass
    inner = grid.nodes <= 0.5 * R
    local = float(np.dot(grid.weights[inner], pot[inner]))
    rate_coercive = gradient - 2.0 * c * grid.integrate(w.phi * pot)
    return RateDetails(
        gradient_term=float(gradient),
        potential_term=float(potential),
        error_budget=float(abs(weight_term) + tail_bound),
        weight_term=float(weight_term),
        tail_bound=float(tail_bound),
        tail_exact=float(tail_exact),
        rate_coercive=float(rate_coercive),
        local_potential=local,
    )


def rate_decomposition(u: RadialField, w: WeightPair, p: float) -> RateTerms:
    """(2 int phi |u_r|^2, p/(p+2) int (psi+phi)|u|^{p+2}, error budget)."""
    d = rate_details(u, w, p)
    return RateTerms(d.gradient_term, d.potential_term, d.error_budget)


def tail_integral(u: RadialField, R: float, p: float) -> float:
    """int_{r>R} (R/r) |u|^{p+2} dx."""
    r = u.grid.nodes
    mask = r > R
    pot = np.abs(u.values[mask]) ** (p + 2.0)
    return float(np.dot(u.grid.weights[mask], R / r[mask] * pot))


@dataclass(frozen=True)
class LocalizedBound:
    R: float
    l2_sq: float
    h1_sq: float
    h1_sq_direct: float
    commutator: float
    commutator_bound: float
    localized_kg: float
    global_kg: float
    margin: float
    holds: bool

    def as_dict(self) -> dict:
        return {k: getattr(self, k) for k in self.__dataclass_fields__}


def chi_laplacian_sup(samples: int = 20001) -> float:
    s = np.linspace(1.0, 2.0, samples)
    return float(np.max(np.abs(chi_laplacian(s))))


def coercive_lower_bound_check(
    u: RadialField, w: WeightPair, p: float, g: GroundStateProfile
) -> LocalizedBound:
    """Check ||chi u||^2 ||chi u||_{H1dot}^{p-2} < (1 - delta'/2) ||Q||^2 ||grad Q||^{p-2}.

    chi^2 = phi(r/R) and delta' = 1 - kg_ratio(u).  The homogeneous H^1 norm
    of chi u is obtained from int phi |u_r|^2 minus the commutator
    int chi Lap(chi) |u|^2; a direct evaluation is reported alongside.
    """
    grid = u.grid
    dens = np.abs(u.values) ** 2
    ur2 = np.abs(radial_derivative(u)) ** 2
    l2 = float(grid.integrate(w.phi * dens))
    comm = float(grid.integrate(chi_laplacian(w.s) * dens)) / w.R**2
    h1 = float(grid.integrate(w.phi * ur2)) - comm
    chi_u = RadialField(grid, np.sqrt(w.phi) * u.values)
    h1_direct = norm_bundle(chi_u, p).kinetic
    nb = norm_bundle(u, p)
    global_kg = nb.mass * nb.kinetic ** ((p - 2.0) / 2.0) / g.threshold_kg
    local_kg = l2 * max(h1, 0.0) ** ((p - 2.0) / 2.0) / g.threshold_kg
    delta = 1.0 - global_kg
    return LocalizedBound(
        R=w.R,
        l2_sq=l2,
        h1_sq=h1,
        h1_sq_direct=h1_direct,
        commutator=comm,
        commutator_bound=chi_laplacian_sup() * nb.mass / w.R**2,
        localized_kg=local_kg,
        global_kg=global_kg,
        margin=1.0 - local_kg,
        holds=bool(delta > 0 and local_kg < 1.0 - 0.5 * delta),
    )


def sigma_exponent(p: float) -> float:
    return min(2.0, p / 2.0)


def alpha_exponent(p: float) -> float:
    return max(1.0 / 3.0, 2.0 / (p + 2.0))


def fit_growth_exponent(times, values, lo_fraction: float = 0.25) -> float:
    """Least-squares slope of log(values) against log(times) on [lo*T, T]."""
    t = np.asarray(times, dtype=float)
    v = np.asarray(values, dtype=float)
    T = t[-1]
    sel = (t >= lo_fraction * T) & (t > 0) & (v > 0)
    if sel.sum() < 2:
        return math.nan
    slope, _ = np.polyfit(np.log(t[sel]), np.log(v[sel]), 1)
    return float(slope)


@dataclass
class MorawetzSeries:
    times: np.ndarray
    action: np.ndarray
    rate_fd: np.ndarray
    rate_exact: np.ndarray
    rate_coercive: np.ndarray
    rate_error_budget: np.ndarray
    local_potential: np.ndarray
    cumulative_potential: np.ndarray
    R: float
    p: float
    e0: float
    fit_window: float = 0.25
    normalized: bool = True

    @property
    def spacetime_potential(self) -> float:
        return float(self.cumulative_potential[-1])

    @property
    def sigma(self) -> float:
        return sigma_exponent(self.p)

    @property
    def alpha_theory(self) -> float:
        return alpha_exponent(self.p)

    @property
    def alpha_fitted(self) -> float:
        return fit_growth_exponent(self.times, self.cumulative_potential, self.fit_window)

    @property
    def eta_measured(self) -> float:
        """min_t (rate_coercive + error_budget) / local_potential."""
        lp = self.local_potential
        ok = lp > 0
        if not ok.any():
            return math.nan
        return float(np.min((self.rate_coercive[ok] + self.rate_error_budget[ok]) / lp[ok]))

    @property
    def c_action_bound(self) -> float:
        return float(np.max(np.abs(self.action)) / (self.R * abs(self.e0)))

    @property
    def ftc_error(self) -> float:
        """|A(T) - A(0) - int_0^T dA/dt dt| using the exact rate."""
        integral = trapezoid(self.rate_exact, self.times)
        return float(abs(self.action[-1] - self.action[0] - integral))

    def summary(self) -> dict:
        return {
            "R": self.R,
            "sigma": self.sigma,
            "alpha_theory": self.alpha_theory,
            "alpha_fitted": self.alpha_fitted,
            "eta_measured": self.eta_measured,
            "C_action_bound": self.c_action_bound,
            "E0": self.e0,
            "spacetime_potential": self.spacetime_potential,
            "ftc_error": self.ftc_error,
            "normalized": self.normalized,
        }

    def rows(self):
        header = (
            "t",
            "A",
            "dA_fd",
            "rate_coercive",
            "error_budget",
            "local_potential",
            "cumulative_spacetime_potential",
        )
        data = np.column_stack(
            [
                self.times,
                self.action,
                self.rate_fd,
                self.rate_coercive,
                self.rate_error_budget,
                self.local_potential,
                self.cumulative_potential,
            ]
        )
        return header, data


def policy_radius(policy: str, p: float, t_end: float, R: float | None = None) -> float:
    if policy == "fixed":
        if R is None:
            raise InvalidArgument("R_policy 'fixed' needs an explicit R")
        return float(R)
    if policy == "scaling":
        return max(1.0, t_end ** (1.0 / (1.0 + sigma_exponent(p))))
    raise InvalidArgument(f"unknown R_policy {policy!r}")


def spacetime_estimate(
    traj: Trajectory,
    R_policy: str = "scaling",
    p: float | None = None,
    R: float | None = None,
    fit_window: float = 0.25,
) -> MorawetzSeries:
    """Accumulate A(t), its rate terms and int_0^t int |u|^{p+2} along a run."""
    if traj.blowup:
        raise EstimateNotApplicable("trajectory halted with a blow-up flag")
    if len(traj) < 2:
        raise EstimateNotApplicable("need at least two snapshots")
    p = traj.p if p is None else p
    times = traj.t
    radius = policy_radius(R_policy, p, float(times[-1]), R)
    w = make_weights(radius, traj.grid)
    action, rate_exact, coercive, budget, local, pot = [], [], [], [], [], []
    for u in traj.snapshots:
        d = rate_details(u, w, p)
        action.append(morawetz_action(u, w))
        rate_exact.append(d.rate_exact)
        coercive.append(d.rate_coercive)
        budget.append(d.error_budget)
        local.append(d.local_potential)
        pot.append(lp_power(u, p + 2.0))
    action = np.array(action)
    m0 = traj.monitors[0]
    e0 = m0.energy
    normalized = m0.energy > 0 and abs(m0.mass - m0.energy) <= 1e-6 * m0.mass
    return MorawetzSeries(
        times=times,
        action=action,
        rate_fd=np.gradient(action, times),
        rate_exact=np.array(rate_exact),
        rate_coercive=np.array(coercive),
        rate_error_budget=np.array(budget),
        local_potential=np.array(local),
        cumulative_potential=cumulative_trapezoid(pot, times, initial=0.0),
        R=radius,
        p=p,
        e0=e0,
        fit_window=fit_window,
        normalized=bool(normalized),
    )
