"""Reference computations that share no code with the package.

Used only by the tests: they check the package against methods built on a
different discretization or a different algorithm.
"""
from __future__ import annotations

import numpy as np
import scipy.sparse as sp
from scipy.integrate import cumulative_simpson, solve_ivp
from scipy.sparse.linalg import spsolve


def petviashvili_q0(p: float, h: float, L: float = 30.0, iters: int = 400) -> float:
    """Q(0) from Petviashvili iteration on a cell-centred second-order grid."""
    n = int(round(L / h))
    r = (np.arange(n) + 0.5) * h
    rp = r + 0.5 * h
    rm = r - 0.5 * h
    main = (rp + rm) / (r * h * h)
    upper = -rp[:-1] / (r[:-1] * h * h)
    lower = -rm[1:] / (r[1:] * h * h)
    # -Lap + 1; rm[0] = 0 gives the symmetry condition, Dirichlet past L
    op = sp.diags([lower, main + 1.0, upper], [-1, 0, 1], format="csc")
    q = 2.0 * np.exp(-r * r)
    gamma = (p + 1.0) / p
    area = r  # the 2 pi h factor cancels in the stabilising ratio
    for _ in range(iters):
        nl = q ** (p + 1.0)
        m = np.dot(area * q, op @ q) / np.dot(area * q, nl)
        q_new = m**gamma * spsolve(op, nl)
        if np.max(np.abs(q_new - q)) < 1e-14:
            q = q_new
            break
        q = q_new
    return float((9.0 * q[0] - q[1]) / 8.0)


def petviashvili_richardson(p: float, h: float = 0.02) -> float:
    """Second-order values at h and h/2 combined to fourth order."""
    coarse = petviashvili_q0(p, h)
    fine = petviashvili_q0(p, 0.5 * h)
    return (4.0 * fine - coarse) / 3.0


def shooting_oracle_q0(p: float, tol: float = 1e-12) -> float:
    """Bisection on Q(0) using LSODA and a plain sign test at a fixed radius.

    A shot is an overshoot when Q' becomes positive before Q reaches zero.
    Solves in the variable y = (Q, r Q') to avoid the 1/r term.
    """

    def rhs(r, y):
        q, rq = y
        return [rq / r, r * (q - abs(q) ** p * q)]

    def over(q0):
        r0 = 1e-6
        sol = solve_ivp(rhs, (r0, 40.0), [q0, 0.5 * r0 * r0 * (q0 - q0 ** (p + 1))],
                        method="LSODA", rtol=1e-12, atol=1e-14, dense_output=True)
        rr = np.linspace(r0, sol.t[-1], 40001)
        q, rq = sol.sol(rr)
        cross = np.nonzero(q < 0)[0]
        turn = np.nonzero(rq > 0)[0]
        first_cross = cross[0] if cross.size else rr.size
        first_turn = turn[0] if turn.size else rr.size
        return first_turn < first_cross

    lo, hi = 1.0 + 1e-9, 8.0
    assert over(lo) and not over(hi)
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if over(mid):
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def psi_simpson(s: np.ndarray, phi) -> np.ndarray:
    """psi(s) = s^{-1} int_0^s phi by cumulative Simpson on a fine uniform grid."""
    fine = np.linspace(0.0, max(float(np.max(s)), 2.0), 200001)
    cum = cumulative_simpson(phi(fine), x=fine, initial=0.0)
    return np.interp(s, fine, cum) / s


def free_gaussian(r: np.ndarray, t: float) -> np.ndarray:
    """Exact free evolution of exp(-r^2) in 2D: e^{-r^2/(1+4it)} / (1+4it)."""
    z = 1.0 + 4.0j * t
    return np.exp(-(r * r) / z) / z


def radial_quad(func, r_max: float, n: int = 200001) -> float:
    """int_0^{r_max} func(r) 2 pi r dr by composite Simpson on a fine grid."""
    from scipy.integrate import simpson

    r = np.linspace(0.0, r_max, n)
    return float(simpson(func(r) * 2.0 * np.pi * r, x=r))
