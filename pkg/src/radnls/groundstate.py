"""Ground state of -Lap Q + Q - Q^{p+1} = 0 by shooting on Q(0)."""
from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np
from scipy.integrate import solve_ivp
from scipy.special import k0e

from .errors import BracketFailure, ToleranceUnreachable
from .grid import (
    NormBundle,
    RadialField,
    RadialGrid,
    check_exponent,
    make_grid,
    norm_bundle,
)

log = logging.getLogger(__name__)

SCAN = np.arange(1.0, 8.0 + 1e-12, 0.5)
R_START = 1e-4
R_END = 40.0
TAIL_CUTOFF = 1e-8
SEPARATION = 1e-6


def default_grid() -> RadialGrid:
    return make_grid(30.0, 3000)


@dataclass(frozen=True)
class GroundStateProfile:
    p: float
    field: RadialField
    q0: float
    c0: float
    norms: NormBundle
    threshold_me: float
    threshold_kg: float
    graft_radius: float

    @property
    def grid(self) -> RadialGrid:
        return self.field.grid

    @property
    def values(self) -> np.ndarray:
        return self.field.values.real

    def as_dict(self) -> dict:
        return {
            "p": self.p,
            "q0": self.q0,
            "c0": self.c0,
            "mass": self.norms.mass,
            "kinetic": self.norms.kinetic,
            "potential": self.norms.potential,
            "energy": self.norms.energy,
            "threshold_me": self.threshold_me,
            "threshold_kg": self.threshold_kg,
        }


def _rhs(p):
    def f(r, y):
        q, dq = y
        return [dq, -dq / r + q - np.abs(q) ** p * q]

    return f


def _initial(q0, p):
    # Q = q0 + c r^2 + O(r^4) with 4c = q0 - q0^{p+1}
    c = 0.25 * (q0 - q0 ** (p + 1))
    return [q0 + c * R_START**2, 2.0 * c * R_START]


def _integrate(q0: float, p: float, dense: bool = False, r_end: float = R_END):
    def crosses(r, y):
        return y[0]

    def turns(r, y):
        return y[1]

    crosses.terminal = True
    crosses.direction = -1
    turns.terminal = True
    turns.direction = 1
    return solve_ivp(
        _rhs(p),
        (R_START, r_end),
        _initial(q0, p),
        method="DOP853",
        rtol=1e-12,
        atol=1e-15,
        events=(crosses, turns),
        dense_output=dense,
    )


def classify_shot(q0: float, p: float) -> str:
    """'under' if Q crosses zero, 'over' if Q turns upward while positive."""
    if q0 ** p <= 1.0:
        return "over"
    sol = _integrate(q0, p)
    if sol.t_events[0].size:
        return "under"
    return "over"


def _bracket(p):
    prev = None
    for q in SCAN:
        kind = classify_shot(q, p)
        if prev is not None and prev[1] == "over" and kind == "under":
            return prev[0], q
        prev = (q, kind)
    raise BracketFailure(
        f"no over/undershoot pair for Q(0) in [{SCAN[0]}, {SCAN[-1]}] at p={p}"
    )


def bisect_q0(p: float, tol: float) -> tuple[float, float]:
    """Bracket [lo, hi] around the ground-state Q(0) with hi - lo < tol."""
    lo, hi = _bracket(p)
    if tol < 8 * np.finfo(float).eps * hi:
        raise ToleranceUnreachable(f"tol={tol:g} below float resolution at Q(0)~{hi:g}")
    while hi - lo >= tol:
        mid = 0.5 * (lo + hi)
        if mid in (lo, hi):
            raise ToleranceUnreachable(f"bisection stalled at width {hi - lo:g}")
        if classify_shot(mid, p) == "under":
            hi = mid
        else:
            lo = mid
    return lo, hi


def _graft_radius(lo_sol, hi_sol, q0):
    r = np.linspace(R_START, min(lo_sol.t[-1], hi_sol.t[-1]), 20001)
    qlo = lo_sol.sol(r)[0]
    qhi = hi_sol.sol(r)[0]
    qmid = 0.5 * (qlo + qhi)
    bad = (np.abs(qhi - qlo) > SEPARATION * np.abs(qmid)) | (qmid < TAIL_CUTOFF * q0)
    idx = int(np.argmax(bad)) if bad.any() else r.size - 1
    return float(r[max(idx - 1, 0)])


def shoot_ground_state(
    p: float, tol: float = 1e-12, grid: RadialGrid | None = None
) -> GroundStateProfile:
    """Positive radial ground state on ``grid`` with its variational constants.

    Q(0) is bisected between an undershoot (Q crosses zero) and an overshoot
    (Q' turns positive while Q > 0) until the bracket is narrower than
    ``tol``.  Inside the radius where the two bracketing shots still agree the
    ODE solution is used; beyond it Q is continued by the decaying solution
    K_0(r) of the linearised equation, matched in value.
    """
    p = check_exponent(p)
    if not 0 < tol <= 1e-6:
        raise ToleranceUnreachable(f"tol must lie in (0, 1e-6], got {tol!r}")
    grid = grid or default_grid()
    lo, hi = bisect_q0(p, tol)
    q0 = 0.5 * (lo + hi)
    lo_sol = _integrate(lo, p, dense=True)
    hi_sol = _integrate(hi, p, dense=True)
    r_g = _graft_radius(lo_sol, hi_sol, q0)
    mid_sol = _integrate(q0, p, dense=True, r_end=r_g + 1e-9)
    r = grid.nodes
    vals = np.empty(grid.n)
    inner = r <= r_g
    vals[inner] = mid_sol.sol(r[inner])[0]
    q_g = mid_sol.sol(r_g)[0]
    # K0(r)/K0(r_g) via the exponentially scaled k0e
    outer = ~inner
    vals[outer] = q_g * k0e(r[outer]) / k0e(r_g) * np.exp(-(r[outer] - r_g))
    vals[-1] = 0.0
    field = RadialField(grid, vals)
    norms = norm_bundle(field, p)
    kg = norms.mass * norms.kinetic ** ((p - 2.0) / 2.0)
    me = norms.mass**2 * norms.energy ** (p - 2.0)
    c0 = (p + 2.0) / (p * kg)
    log.debug("p=%g q0=%.15g graft=%.3f", p, q0, r_g)
    return GroundStateProfile(p, field, q0, c0, norms, me, kg, r_g)


def pohozaev_residuals(g: GroundStateProfile) -> tuple[float, float]:
    p, nb = g.p, g.norms
    rho1 = nb.mass / (2.0 / (p + 2.0) * nb.potential) - 1.0
    rho2 = nb.kinetic / (p / (p + 2.0) * nb.potential) - 1.0
    return rho1, rho2


def gn_constant(g: GroundStateProfile) -> float:
    """Sharp Gagliardo-Nirenberg constant C0 = (p+2) / (p ||Q||^2 ||grad Q||^{p-2})."""
    return (g.p + 2.0) / (g.p * g.threshold_kg)


def gn_constant_direct(g: GroundStateProfile) -> float:
    nb = g.norms
    return nb.potential / (nb.mass * nb.kinetic ** (g.p / 2.0))


def gn_ratio(f: RadialField, g: GroundStateProfile) -> float:
    """||f||_{p+2}^{p+2} / (C0 ||f||_2^2 ||grad f||_2^p); at most 1 by sharp GN."""
    nb = norm_bundle(f, g.p)
    return nb.potential / (g.c0 * nb.mass * nb.kinetic ** (g.p / 2.0))


def threshold_closed_form(p: float, c0: float) -> float:
    """M(Q)^2 E(Q)^{p-2} written through C0."""
    return ((p - 2.0) / (2.0 * p)) ** (p - 2.0) * ((p + 2.0) / p) ** 2 / c0**2


def threshold_quantities(g: GroundStateProfile) -> tuple[float, float]:
    return g.threshold_me, g.threshold_kg


def threshold_identity_error(g: GroundStateProfile) -> float:
    return abs(g.threshold_me / threshold_closed_form(g.p, g.c0) - 1.0)


_D1 = np.array([1 / 280, -4 / 105, 1 / 5, -4 / 5, 0.0, 4 / 5, -1 / 5, 4 / 105, -1 / 280])
_D2 = np.array(
    [-1 / 560, 8 / 315, -1 / 5, 8 / 5, -205 / 72, 8 / 5, -1 / 5, 8 / 315, -1 / 560]
)


def ode_residual(g: GroundStateProfile) -> np.ndarray:
    """Q'' + Q'/r - Q + Q^{p+1} at the nodes, by eighth-order central differences.

    Q(0) = q0 and the even reflection supply the stencil points left of the
    first node; the last four nodes are dropped.
    """
    q = g.values
    h = g.grid.h
    ext = np.concatenate([q[3::-1], [g.q0], q])
    width = ext.size - 8
    d1 = sum(c * ext[i : i + width] for i, c in enumerate(_D1)) / h
    d2 = sum(c * ext[i : i + width] for i, c in enumerate(_D2)) / (h * h)
    qc = ext[4 : 4 + width]
    r = np.arange(width) * h
    res = d2 - qc + qc ** (g.p + 1)
    res[1:] += d1[1:] / r[1:]
    res[0] += d2[0]
    return res[1:]
