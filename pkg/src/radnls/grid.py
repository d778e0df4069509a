"""Radial grid, quadrature, norms and differential operators.

Radial functions on R^2 are sampled at r_k = k*h, k = 1..n, h = r_max/n.
There is no node at the origin; values there come from an even fit in r^2
through the first three nodes.  The outer node r_max carries the homogeneous
Dirichlet condition, so the unknowns of every operator are nodes 1..n-1.

Quadrature for the area measure 2*pi*r dr is the trapezoidal rule with
endpoint corrections.  At the origin the integrand r*g(r) is odd and smooth,
so the Euler-Maclaurin error terms are cancelled with Bernoulli-number
corrections on the first three nodes (exact for r^1, r^3, r^5).  At r_max the
standard Gregory weights 3/8, 7/6, 23/24 are used.  Together the two ends keep
the rule exact for g = const.

The kinetic form starts from a fourth-order midpoint derivative, squared and
summed with midpoint weights, giving a stiffness matrix A = D^T Omega D.  A
small symmetric, zero-row-sum patch on the couplings among nodes 1..3 makes
the resulting operator exact for r^2 next to the origin.  The Laplacian is
L = -W^{-1} A, self-adjoint in the same weighted inner product that measures
mass, so the Crank-Nicolson step is exactly unitary in the reported mass.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
import scipy.sparse as sp

from .errors import InvalidArgument, UndefinedRatio, UnsupportedExponent

MIN_NODES = 16

# Bernoulli corrections on nodes 1..3: sum_k d_k k^q = B_{q+1}/(q+1), q = 1, 3, 5.
_ORIGIN_CORRECTION = np.linalg.solve(
    np.array([[1.0, 2.0, 3.0], [1.0, 8.0, 27.0], [1.0, 32.0, 243.0]]),
    np.array([1.0 / 12.0, -1.0 / 120.0, 1.0 / 252.0]),
)
# Gregory end weights, listed from r_max inward.
_OUTER_WEIGHTS = np.array([3.0 / 8.0, 7.0 / 6.0, 23.0 / 24.0])
# u(0) = sum_k a_k u(k h), exact for 1, r^2, r^4.
_ORIGIN_EXTRAPOLATION = np.linalg.solve(
    np.array([[1.0, 1.0, 1.0], [1.0, 4.0, 9.0], [1.0, 16.0, 81.0]]),
    np.array([1.0, 0.0, 0.0]),
)


@dataclass(frozen=True, eq=False)
class RadialGrid:
    """Uniform radial grid with quadrature weights for 2*pi*r dr."""

    r_max: float
    n: int
    nodes: np.ndarray = field(repr=False)
    weights: np.ndarray = field(repr=False)

    @property
    def h(self) -> float:
        return self.r_max / self.n

    @property
    def area(self) -> float:
        return float(np.pi * self.r_max**2)

    def integrate(self, g) -> float | complex:
        """Integrate samples g(r_k) against 2*pi*r dr."""
        return np.dot(self.weights, g)

    def field(self, values) -> "RadialField":
        return RadialField(self, values)

    def sample(self, func) -> "RadialField":
        """Evaluate ``func(r)`` on the nodes; the value at r_max is forced to zero."""
        vals = np.asarray(func(self.nodes), dtype=complex).copy()
        vals[-1] = 0.0
        return RadialField(self, vals)

    @cached_property
    def operators(self) -> "RadialOperators":
        return RadialOperators(self)

    def __eq__(self, other):
        return (
            isinstance(other, RadialGrid)
            and self.n == other.n
            and self.r_max == other.r_max
        )

    def __hash__(self):
        return hash((self.r_max, self.n))


def make_grid(r_max: float, n: int) -> RadialGrid:
    """Build the uniform grid r_k = k*r_max/n, k = 1..n, with its quadrature."""
    if not np.isfinite(r_max) or r_max <= 0:
        raise InvalidArgument(f"r_max must be positive, got {r_max!r}")
    if int(n) != n or n < MIN_NODES:
        raise InvalidArgument(f"n must be an integer >= {MIN_NODES}, got {n!r}")
    n = int(n)
    r_max = float(r_max)
    h = r_max / n
    k = np.arange(1, n + 1, dtype=float)
    nodes = k * h
    factor = np.ones(n)
    factor[-3:] = _OUTER_WEIGHTS[::-1]
    weights = 2.0 * np.pi * h * nodes * factor
    weights[:3] += 2.0 * np.pi * h * h * k[:3] * _ORIGIN_CORRECTION
    nodes.setflags(write=False)
    weights.setflags(write=False)
    return RadialGrid(r_max, n, nodes, weights)


class RadialOperators:
    """Sparse operators on the interior unknowns (nodes 1..n-1) of a grid."""

    def __init__(self, grid: RadialGrid):
        n, h = grid.n, grid.h
        self.grid = grid
        self.size = n - 1
        # Extension to positions -1..n+2 (array offset 1): even about 0,
        # zero at r_max, odd about r_max.
        m = self.size
        rows, cols, vals = [], [], []

        def put(pos, col, val):
            rows.append(pos + 1)
            cols.append(col - 1)
            vals.append(val)

        put(-1, 1, 1.0)
        for j, a in enumerate(_ORIGIN_EXTRAPOLATION, start=1):
            put(0, j, a)
        for k in range(1, n):
            put(k, k, 1.0)
        put(n + 1, n - 1, -1.0)
        put(n + 2, n - 2, -1.0)
        ext = sp.csr_matrix((vals, (rows, cols)), shape=(n + 4, m))

        # Midpoint derivative at (j + 1/2) h, j = 0..n-1.
        mid = np.arange(n)
        stencil = np.array([1.0, -27.0, 27.0, -1.0]) / (24.0 * h)
        d0 = sp.csr_matrix(
            (
                np.tile(stencil, n),
                (np.repeat(mid, 4), (mid[:, None] + np.arange(4)).ravel()),
            ),
            shape=(n, n + 4),
        )
        self.midpoints = (mid + 0.5) * h
        self.mid_weights = 2.0 * np.pi * self.midpoints * h
        self.dmid = (d0 @ ext).tocsr()

        # Fourth-order centred node derivative at nodes 1..n.
        node = np.arange(1, n + 1)
        cstencil = np.array([1.0, -8.0, 0.0, 8.0, -1.0]) / (12.0 * h)
        g0 = sp.csr_matrix(
            (
                np.tile(cstencil, n),
                (np.repeat(node - 1, 5), ((node - 2 + 1)[:, None] + np.arange(5)).ravel()),
            ),
            shape=(n, n + 4),
        )
        self.dnode = (g0 @ ext).tocsr()

        self.mass_diag = np.array(grid.weights[:-1])
        stiff = (self.dmid.T @ sp.diags(self.mid_weights) @ self.dmid).tocsr()
        stiff = stiff + self._origin_patch(stiff)
        self.stiffness = (0.5 * (stiff + stiff.T)).tocsc()
        self.laplacian = (sp.diags(-1.0 / self.mass_diag) @ self.stiffness).tocsr()

    def _origin_patch(self, stiff) -> sp.csr_matrix:
        # The corrected origin weights leave an O(1) pointwise error in the
        # Laplacian of r^2 on nodes 1..3.  A symmetric, zero-row-sum patch on
        # the edges {1,2}, {1,3}, {2,3} removes it without touching constants.
        r = self.grid.nodes[:3]
        u = np.zeros(self.size)
        u[:3] = r**2
        # only rows 0..2 matter, so later entries of u may stay zero as long
        # as the stiffness rows 0..2 do not reach past node 6
        u[3:7] = self.grid.nodes[3:7] ** 2
        resid = (stiff @ u)[:3] + 4.0 * self.mass_diag[:3]
        edges = [(0, 1), (0, 2), (1, 2)]
        basis = np.zeros((3, 3))
        for e, (i, j) in enumerate(edges):
            basis[i, e] += u[i] - u[j]
            basis[j, e] += u[j] - u[i]
        coef = np.linalg.lstsq(basis, -resid, rcond=None)[0]
        rows, cols, vals = [], [], []
        for c, (i, j) in zip(coef, edges):
            rows += [i, j, i, j]
            cols += [i, j, j, i]
            vals += [c, c, -c, -c]
        return sp.csr_matrix((vals, (rows, cols)), shape=stiff.shape)

    def kinetic(self, u: np.ndarray) -> float:
        v = u[:-1]
        return float(np.real(np.vdot(v, self.stiffness @ v)))

    def derivative(self, u: np.ndarray) -> np.ndarray:
        return self.dnode @ u[:-1]

    def laplace(self, u: np.ndarray) -> np.ndarray:
        out = np.zeros(self.grid.n, dtype=np.result_type(u, float))
        out[:-1] = self.laplacian @ u[:-1]
        return out


@dataclass(frozen=True, eq=False)
class RadialField:
    """Complex samples u(r_k) of a radial function on a grid."""

    grid: RadialGrid
    values: np.ndarray

    def __post_init__(self):
        vals = np.array(self.values, dtype=complex)
        if vals.shape != (self.grid.n,):
            raise InvalidArgument(
                f"field needs {self.grid.n} samples, got shape {vals.shape}"
            )
        if not np.all(np.isfinite(vals)):
            raise InvalidArgument("field values must be finite")
        vals.setflags(write=False)
        object.__setattr__(self, "values", vals)

    def __mul__(self, c):
        return RadialField(self.grid, self.values * c)

    __rmul__ = __mul__

    def __add__(self, other: "RadialField"):
        return RadialField(self.grid, self.values + other.values)

    def __sub__(self, other: "RadialField"):
        return RadialField(self.grid, self.values - other.values)

    @property
    def abs(self) -> np.ndarray:
        return np.abs(self.values)

    def is_zero(self) -> bool:
        return not np.any(self.values)

    def origin_value(self) -> complex:
        return complex(np.dot(_ORIGIN_EXTRAPOLATION, self.values[:3]))


@dataclass(frozen=True)
class NormBundle:
    mass: float
    kinetic: float
    potential: float
    energy: float
    h1: float
    p: float

    def as_dict(self) -> dict:
        return {
            "mass": self.mass,
            "kinetic": self.kinetic,
            "potential": self.potential,
            "energy": self.energy,
        }


def lp_norm(f: RadialField, q: float) -> float:
    """(int |f|^q 2 pi r dr)^(1/q)."""
    if not q >= 1:
        raise InvalidArgument(f"q must be >= 1, got {q!r}")
    total = f.grid.integrate(np.abs(f.values) ** q)
    return float(max(total, 0.0) ** (1.0 / q))


def lp_power(f: RadialField, q: float) -> float:
    """int |f|^q 2 pi r dr, without the final root."""
    return float(f.grid.integrate(np.abs(f.values) ** q))


def grad_l2_sq(f: RadialField) -> float:
    """Discrete ||grad f||_2^2 (the kinetic form of the grid Laplacian)."""
    return f.grid.operators.kinetic(f.values)


def radial_derivative(f: RadialField) -> np.ndarray:
    """Fourth-order d/dr at the nodes, using the even and Dirichlet extensions."""
    return f.grid.operators.derivative(f.values)


def radial_laplacian(f: RadialField) -> RadialField:
    """Apply the discrete radial Laplacian (Dirichlet at r_max)."""
    return RadialField(f.grid, f.grid.operators.laplace(f.values))


def check_exponent(p: float) -> float:
    p = float(p)
    if not (np.isfinite(p) and p >= 2.0):
        raise UnsupportedExponent(f"exponent p must satisfy 2 <= p < inf, got {p!r}")
    return p


def norm_bundle(f: RadialField, p: float) -> NormBundle:
    """Mass, kinetic and potential integrals plus the energy."""
    p = check_exponent(p)
    mass = lp_power(f, 2.0)
    kinetic = grad_l2_sq(f)
    potential = lp_power(f, p + 2.0)
    energy = 0.5 * kinetic - potential / (p + 2.0)
    return NormBundle(mass, kinetic, potential, energy, float(np.sqrt(mass + kinetic)), p)


def h1_norm(f: RadialField) -> float:
    return float(np.sqrt(lp_power(f, 2.0) + grad_l2_sq(f)))


def radial_sobolev_ratio(f: RadialField) -> float:
    """max_k r_k^{1/2} |f(r_k)| divided by ||f||_{H^1}."""
    if f.is_zero():
        raise UndefinedRatio("radial Sobolev ratio is undefined for f = 0")
    peak = np.max(np.sqrt(f.grid.nodes) * f.abs)
    return float(peak / h1_norm(f))


def boundary_mass_fraction(f: RadialField, guard: float = 0.9) -> float:
    """Fraction of the mass sitting in r > guard * r_max."""
    dens = np.abs(f.values) ** 2
    total = f.grid.integrate(dens)
    if total == 0:
        return 0.0
    outer = f.grid.nodes > guard * f.grid.r_max
    return float(np.dot(f.grid.weights[outer], dens[outer]) / total)


def effective_radius(f: RadialField, fraction: float = 0.99) -> float:
    """Smallest node radius enclosing ``fraction`` of the mass."""
    dens = f.grid.weights * np.abs(f.values) ** 2
    cum = np.cumsum(dens)
    if cum[-1] == 0:
        return 0.0
    idx = int(np.searchsorted(cum, fraction * cum[-1]))
    return float(f.grid.nodes[min(idx, f.grid.n - 1)])
