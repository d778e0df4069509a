import json

import numpy as np
import pytest

from radnls.config import ExperimentConfig
from radnls.diagnostics import (
    BLOWUP,
    INCONCLUSIVE,
    SCATTERING,
    L2pAccumulation,
    ScatteringCheck,
    _tail_indices,
    blowup_probe,
    decide_outcome,
    l2p_accumulation,
    run_experiment,
    run_safely,
    scattering_check,
    scattering_metric,
    spacetime_2p_norm,
)
from radnls.errors import EstimateNotApplicable, InsufficientData
from radnls.evolve import EvolveConfig, evolve, linear_propagate
from radnls.grid import h1_norm, make_grid
from radnls.groundstate import shoot_ground_state


def gauss(grid, a=1.0):
    return grid.sample(lambda r: a * np.exp(-r * r))


@pytest.fixture(scope="module")
def linear_run():
    g = make_grid(40.0, 1600)
    u = gauss(g, 1.2) * np.exp(0.2j * g.nodes**2)
    return evolve(u, EvolveConfig(dt=0.01, t_end=4.0, p=3.0, nonlinear=False, snapshot_stride=10))


@pytest.fixture(scope="module")
def soliton_run():
    Q = shoot_ground_state(2.0, grid=make_grid(30.0, 1500))
    return evolve(Q.field, EvolveConfig(dt=0.01, t_end=6.0, p=2.0, snapshot_stride=10))


class TestScatteringMetric:
    def test_linear_flow_vanishes(self, linear_run):
        d = scattering_metric(linear_run)
        assert d.size == 8
        assert np.max(d) < 1e-10 * h1_norm(linear_run.snapshots[0])
        assert scattering_check(linear_run).consistent

    def test_equals_explicit_back_propagation(self, subthreshold_run):
        _, _, traj = subthreshold_run
        idx = _tail_indices(traj, 0.5, 5)
        profiles = [linear_propagate(traj.snapshots[k], -traj.times[k], traj.dt) for k in idx]
        direct = [h1_norm(b - a) for a, b in zip(profiles[:-1], profiles[1:])]
        assert np.allclose(scattering_metric(traj, 0.5, 5), direct, rtol=1e-6, atol=1e-12)

    def test_profiles_equally_spaced(self, linear_run):
        idx = _tail_indices(linear_run, 0.5, 9)
        assert len(set(np.diff(idx))) == 1
        assert linear_run.t[idx[0]] >= 0.5 * linear_run.t[-1]

    def test_insufficient_data(self):
        g = make_grid(10.0, 200)
        traj = evolve(gauss(g), EvolveConfig(dt=0.1, t_end=0.2, p=3.0, snapshot_stride=1))
        with pytest.raises(InsufficientData):
            scattering_metric(traj)

    def test_soliton_increments_bounded_below(self, soliton_run):
        chk = scattering_check(soliton_run)
        assert np.min(chk.increments) > 0.1 * h1_norm(soliton_run.snapshots[0])
        assert not chk.consistent

    def test_subthreshold_consistent(self, subthreshold_run):
        _, _, traj = subthreshold_run
        chk = scattering_check(traj)
        assert chk.decreasing and chk.consistent
        assert chk.relative_total < 1e-2

    def test_blowup_not_applicable(self):
        traj = evolve(gauss(make_grid(8.0, 2000), 3.0),
                      EvolveConfig(dt=5e-5, t_end=0.2, p=3.0, snapshot_stride=50))
        with pytest.raises(EstimateNotApplicable):
            scattering_metric(traj)


class TestL2p:
    def test_zero(self):
        g = make_grid(10.0, 200)
        traj = evolve(g.field(np.zeros(200)), EvolveConfig(dt=0.1, t_end=1.0, p=3.0))
        acc = l2p_accumulation(traj)
        assert acc.total == 0.0 and acc.last_quarter_fraction == 0.0

    def test_soliton_grows_linearly(self, soliton_run):
        acc = l2p_accumulation(soliton_run)
        slope = acc.cumulative[-1] / acc.times[-1]
        assert np.allclose(acc.cumulative, slope * acc.times, rtol=1e-2, atol=1e-3)
        assert acc.last_quarter_fraction == pytest.approx(0.25, abs=0.01)
        assert not acc.saturating

    def test_subthreshold_saturates(self, subthreshold_run):
        _, _, traj = subthreshold_run
        acc = l2p_accumulation(traj)
        assert acc.saturating
        assert np.all(np.diff(acc.cumulative) >= 0)
        assert spacetime_2p_norm(traj) == acc.total


class TestBlowupProbe:
    def test_negative_energy_flagged(self):
        probe = blowup_probe(gauss(make_grid(8.0, 2000), 3.0), 3.0,
                             EvolveConfig(dt=5e-5, t_end=0.5, p=3.0, snapshot_stride=50))
        assert probe.blowup and probe.halt_time < 0.1
        assert probe.growth_factor >= 10

    def test_zero_data(self):
        g = make_grid(10.0, 200)
        probe = blowup_probe(g.field(np.zeros(200)), 3.0, EvolveConfig(dt=0.1, t_end=1.0, p=3.0))
        assert not probe.blowup and probe.halt_time is None

    def test_small_data(self):
        probe = blowup_probe(gauss(make_grid(30.0, 1200), 0.5), 4.0,
                             EvolveConfig(dt=0.01, t_end=2.0, p=3.0))
        assert not probe.blowup
        assert probe.growth_factor < 1.5


def _check(consistent):
    d = np.array([1e-5, 5e-6]) if consistent else np.array([1.0, 1.0])
    return ScatteringCheck(d, float(d.sum()), 1.0, 1e-2, True)


def _l2p(saturating):
    t = np.linspace(0, 1, 5)
    cum = np.array([0, 0.9, 1.0, 1.0, 1.0]) if saturating else t.copy()
    return L2pAccumulation(t, np.zeros(5), cum)


class TestDecide:
    @pytest.mark.parametrize("blowup", [False, True])
    @pytest.mark.parametrize("consistent", [False, True])
    @pytest.mark.parametrize("saturating", [False, True])
    @pytest.mark.parametrize("clean", [False, True])
    def test_exclusive(self, blowup, consistent, saturating, clean):
        out = decide_outcome(blowup, True, _check(consistent), _l2p(saturating), clean)
        if blowup:
            assert out == BLOWUP
        elif consistent and saturating and clean:
            assert out == SCATTERING
        else:
            assert out == INCONCLUSIVE

    def test_gate_overrides(self):
        assert decide_outcome(True, False, None, None, True) == INCONCLUSIVE
        assert decide_outcome(False, False, _check(True), _l2p(True), True) == INCONCLUSIVE

    def test_missing_signatures(self):
        assert decide_outcome(False, True, None, _l2p(True), True) == INCONCLUSIVE
        assert decide_outcome(False, True, _check(True), None, True) == INCONCLUSIVE


def small_config(tmp_path, **kw):
    base = dict(p=3.0, r_max=60.0, n=1200, dt=0.01, t_end=3.0, snapshot_stride=10, a=0.6,
                R_policy="fixed", R=4.0, outputs=str(tmp_path / "out"), trajectory_format="csv")
    base.update(kw)
    return ExperimentConfig(**base)


class TestPipeline:
    def test_outputs(self, tmp_path):
        cfg = small_config(tmp_path)
        v = run_experiment(cfg)
        out = tmp_path / "out"
        expected = {"config.json", "ground_state.json", "ground_state.csv", "classification.json",
                    "monitors.csv", "trajectory.csv", "l2p.csv", "scattering.csv",
                    "morawetz.csv", "morawetz.json", "verdict.json"}
        assert expected <= {p.name for p in out.iterdir()}
        verdict = json.loads((out / "verdict.json").read_text())
        assert verdict["outcome"] == v.outcome
        assert v.classification.below and v.scale != 1.0
        assert v.exit_code in (0, 2, 3)

    def test_deterministic(self, tmp_path):
        a = run_experiment(small_config(tmp_path, trajectory_format="none"), tmp_path / "a")
        b = run_experiment(small_config(tmp_path, trajectory_format="none"), tmp_path / "b")
        for name in ("monitors.csv", "morawetz.csv", "scattering.csv", "verdict.json"):
            assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()
        assert a.outcome == b.outcome

    def test_no_output(self, tmp_path):
        run_experiment(small_config(tmp_path, t_end=0.5), None)
        assert not (tmp_path / "out").exists()

    def test_blowup_pipeline(self, tmp_path):
        cfg = small_config(tmp_path, r_max=8.0, n=2000, dt=5e-5, t_end=0.3, snapshot_stride=50,
                           a=3.0, R=2.0, trajectory_format="binary")
        v = run_experiment(cfg)
        assert v.outcome == BLOWUP and v.exit_code == 2
        assert v.classification.negative_energy
        assert v.conservation.energy_drift < cfg.energy_tolerance

    def test_run_safely_maps_errors(self, tmp_path):
        cfg = small_config(tmp_path, initial_data="from_file", path=str(tmp_path / "missing.csv"))
        code, verdict, err = run_safely(cfg)
        assert code == 1 and verdict is None and err
