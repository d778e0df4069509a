import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.optimize import brentq

from radnls.errors import InvalidArgument, NotRescalable, UndefinedMargin
from radnls.evolve import EvolveConfig, evolve
from radnls.grid import make_grid, norm_bundle
from radnls.variational import (
    classify,
    coercivity_margin,
    coercivity_trajectory_check,
    kg_ratio,
    rescale_to_unit,
    scale,
)


def gauss(grid, a=1.0):
    return grid.sample(lambda r: a * np.exp(-r * r))


class TestClassify:
    def test_ground_state_itself(self, gs):
        g = gs(3.0)
        rep = classify(g.field, 3.0, g)
        assert rep.kg_ratio == pytest.approx(1.0, abs=1e-12)
        assert not rep.below

    @pytest.mark.parametrize("p", [2.5, 3.0, 4.0])
    def test_half_ground_state(self, gs, p):
        g = gs(p)
        rep = classify(g.field * 0.5, p, g)
        assert rep.kg_ratio == pytest.approx(0.5**p, rel=1e-10)
        assert rep.me_ratio < 1
        assert rep.below

    @staticmethod
    def _gaussian_norms(a, p):
        m, k = a * a * math.pi / 2, a * a * math.pi
        pot = a ** (p + 2) * math.pi / (p + 2)
        return m, k, k / 2 - pot / (p + 2)

    @pytest.mark.parametrize("p", [2.0, 3.0])
    def test_gaussian_at_kg_point_nine(self, gs, p):
        g = gs(p)
        a = brentq(
            lambda a: (a * a * math.pi / 2) * (a * a * math.pi) ** ((p - 2) / 2) / g.threshold_kg - 0.9,
            0.01, 10.0,
        )
        m, _, e = self._gaussian_norms(a, p)
        me_closed = m * m * e ** (p - 2) / g.threshold_me
        rep = classify(gauss(make_grid(10.0, 2000), a), p, g)
        assert rep.kg_ratio == pytest.approx(0.9, rel=1e-5)
        assert rep.me_ratio == pytest.approx(me_closed, rel=1e-5)
        # at p = 2 the product is M^2 = kg^2; for p > 2 this Gaussian already
        # exceeds the mass-energy threshold (me ~ 1.21 at p = 3)
        assert rep.below == (p == 2.0)

    def test_zero_is_trivial_and_below(self, gs):
        rep = classify(make_grid(30.0, 3000).field(np.zeros(3000)), 3.0, gs(3.0))
        assert rep.trivial and rep.below

    def test_negative_energy(self, gs):
        rep = classify(gauss(make_grid(8.0, 2000), 3.0), 3.0, gs(3.0))
        assert rep.negative_energy
        assert rep.me_ratio is None
        assert not rep.below

    def test_p2_me_ratio_defined_for_negative_energy(self, gs):
        rep = classify(gauss(make_grid(8.0, 2000), 3.0), 2.0, gs(2.0))
        assert rep.negative_energy and not rep.below
        assert rep.me_ratio is not None and rep.me_ratio > 0

    def test_profile_mismatch(self, gs):
        with pytest.raises(InvalidArgument):
            classify(gauss(make_grid(8.0, 200)), 4.0, gs(3.0))

    @given(st.floats(0.05, 2.5), st.floats(0.0, 2 * math.pi))
    @settings(max_examples=30, deadline=None)
    def test_below_iff_both_ratios(self, a, theta):
        from conftest import ground_state

        g = ground_state(3.0)
        rep = classify(gauss(make_grid(10.0, 500), a) * np.exp(1j * theta), 3.0, g)
        if rep.me_ratio is not None:
            assert rep.below == (rep.me_ratio < 1 and rep.kg_ratio < 1)
            assert rep.me_ratio >= 0
        assert rep.kg_ratio >= 0


class TestRescale:
    grid = make_grid(20.0, 4000)

    @pytest.mark.parametrize("p", [2.5, 3.0, 4.0])
    def test_threshold_product_invariant(self, p):
        u = gauss(self.grid, 0.8)
        v, lam = rescale_to_unit(u, p)
        a, b = norm_bundle(u, p), norm_bundle(v, p)
        assert b.mass == pytest.approx(b.energy, rel=1e-10)
        prod = lambda m: m.mass**2 * m.energy ** (p - 2)  # noqa: E731
        assert prod(b) == pytest.approx(prod(a), rel=1e-10)

    def test_fixed_point(self):
        v, _ = rescale_to_unit(gauss(self.grid, 0.8), 3.0)
        _, lam = rescale_to_unit(v, 3.0)
        assert lam == pytest.approx(1.0, abs=1e-10)

    def test_mass_four_times_energy(self):
        p = 3.0

        def gap(a):
            nb = norm_bundle(gauss(self.grid, a), p)
            return nb.mass - 4 * nb.energy

        a = brentq(gap, 0.5, 2.12)
        u = gauss(self.grid, a)
        v, lam = rescale_to_unit(u, p)
        nb = norm_bundle(v, p)
        assert lam != pytest.approx(1.0, abs=1e-3)
        assert nb.mass / nb.energy == pytest.approx(1.0, abs=1e-8)

    def test_not_rescalable(self):
        with pytest.raises(NotRescalable):
            rescale_to_unit(gauss(make_grid(8.0, 2000), 3.0), 3.0)

    def test_scale_law(self):
        p = 3.0
        u = gauss(self.grid)
        lam = 1.7
        a, b = norm_bundle(u, p), norm_bundle(scale(u, lam, p), p)
        assert b.mass == pytest.approx(lam ** (4 / p - 2) * a.mass, rel=1e-8)
        assert b.energy == pytest.approx(lam ** (4 / p) * a.energy, rel=1e-6)

    def test_classification_scale_invariant(self, gs):
        p = 3.0
        u = gauss(make_grid(30.0, 6000), 1.2)
        v, _ = rescale_to_unit(u, p)
        r1, r2 = classify(u, p, gs(p)), classify(v, p, gs(p))
        assert r2.me_ratio == pytest.approx(r1.me_ratio, rel=1e-10)
        assert r2.kg_ratio == pytest.approx(r1.kg_ratio, rel=1e-10)


class TestCoercivity:
    @pytest.mark.parametrize("p", [2.5, 3.0, 4.0, 6.0])
    def test_ground_state_margin_zero(self, gs, p):
        assert coercivity_margin(gs(p).field, p) == pytest.approx(0.0, abs=1e-5)

    @given(st.floats(0.0, 2 * math.pi))
    @settings(max_examples=30, deadline=None)
    def test_phase_invariant(self, theta):
        from conftest import ground_state

        f = ground_state(3.0).field * 0.7
        rotated = coercivity_margin(f * np.exp(1j * theta), 3.0)
        assert rotated == pytest.approx(coercivity_margin(f, 3.0), rel=1e-13)

    def test_half_ground_state_positive(self, gs):
        assert coercivity_margin(gs(3.0).field * 0.5, 3.0) > 0

    def test_super_threshold_negative(self, gs):
        assert coercivity_margin(gs(3.0).field * 1.5, 3.0) < 0

    def test_zero_undefined(self):
        with pytest.raises(UndefinedMargin):
            coercivity_margin(make_grid(5.0, 64).field(np.zeros(64)), 3.0)

    def test_single_snapshot(self, gs):
        g = gs(3.0)
        u = g.field * 0.6
        rep = coercivity_trajectory_check([u], 3.0, g)
        assert rep.min_margin == pytest.approx(1 - kg_ratio(u, g), rel=1e-14)
        assert not rep.violation

    def test_linear_run_no_violation(self, gs):
        g = gs(3.0)
        u0 = g.field * 0.8
        traj = evolve(u0, EvolveConfig(dt=0.01, t_end=2.0, p=3.0, nonlinear=False, snapshot_stride=10))
        rep = coercivity_trajectory_check(traj, 3.0, g)
        assert not rep.violation and rep.min_margin > 0

    def test_subthreshold_run_gap(self, gs, subthreshold_run):
        v0, _, traj = subthreshold_run
        rep = coercivity_trajectory_check(traj, 3.0, gs(3.0))
        assert not rep.violation
        assert rep.initial_ok
        assert rep.min_margin > 0.5
