import json
import math

import numpy as np
import pytest

from radnls.errors import InvalidArgument
from radnls.evolve import EvolveConfig, evolve
from radnls.grid import make_grid
from radnls.serialize import (
    read_profile_csv,
    read_table,
    read_trajectory_binary,
    write_json,
    write_monitors_csv,
    write_profile_csv,
    write_table,
    write_trajectory_binary,
    write_trajectory_csv,
)


@pytest.fixture(scope="module")
def traj():
    g = make_grid(10.0, 100)
    u = g.sample(lambda r: np.exp(-r * r)) * np.exp(0.3j * g.nodes)
    return evolve(u, EvolveConfig(dt=0.01, t_end=0.1, p=3.0, snapshot_stride=3))


def test_binary_round_trip(tmp_path, traj):
    head, t, vals = read_trajectory_binary(write_trajectory_binary(tmp_path / "t.bin", traj))
    assert head["n"] == 100 and head["r_max"] == 10.0 and head["p"] == 3.0 and head["dt"] == 0.01
    assert np.array_equal(t, traj.t)
    assert np.array_equal(vals, np.array([u.values for u in traj.snapshots]))


def test_binary_corrupt(tmp_path, traj):
    path = write_trajectory_binary(tmp_path / "t.bin", traj)
    path.write_bytes(path.read_bytes()[:-8])
    with pytest.raises(InvalidArgument):
        read_trajectory_binary(path)
    path.write_bytes(b"abc")
    with pytest.raises(InvalidArgument):
        read_trajectory_binary(path)


def test_trajectory_csv_exact(tmp_path, traj):
    header, data = read_table(write_trajectory_csv(tmp_path / "t.csv", traj))
    assert header == ["t", "r", "Re u", "Im u"]
    assert data.shape == (len(traj) * 100, 4)
    last = data[-100:]
    assert np.array_equal(last[:, 2] + 1j * last[:, 3], traj.snapshots[-1].values)


def test_monitors_csv(tmp_path, traj):
    header, data = read_table(write_monitors_csv(tmp_path / "m.csv", traj))
    assert header[:2] == ["t", "mass"]
    assert np.array_equal(data[:, 1], traj.monitor_array("mass"))


def test_table_round_trip_exact(tmp_path):
    rows = np.random.default_rng(3).normal(size=(20, 3)) * 1e-7
    header, data = read_table(write_table(tmp_path / "x.csv", ("a", "b", "c"), rows))
    assert header == ["a", "b", "c"] and np.array_equal(data, rows)


@pytest.mark.parametrize("complex_values", [False, True])
def test_profile_round_trip(tmp_path, complex_values):
    g = make_grid(5.0, 64)
    f = g.sample(lambda r: np.exp(-r * r) * (np.exp(1j * r) if complex_values else 1))
    back = read_profile_csv(write_profile_csv(tmp_path / "q.csv", f))
    assert back.grid == g
    assert np.array_equal(back.values[:-1], f.values[:-1])


def test_profile_resample(tmp_path):
    g = make_grid(5.0, 64)
    f = g.sample(lambda r: np.exp(-r * r))
    fine = make_grid(5.0, 640)
    back = read_profile_csv(write_profile_csv(tmp_path / "q.csv", f), fine)
    assert np.max(np.abs(back.values - np.exp(-fine.nodes**2))[:-1]) < 1e-4


def test_profile_rejects_irregular_nodes(tmp_path):
    write_table(tmp_path / "q.csv", ("r", "Q"), np.array([[0.1, 1], [0.3, 0.5], [0.4, 0.2]]))
    with pytest.raises(InvalidArgument):
        read_profile_csv(tmp_path / "q.csv")


def test_json_cleans_numpy(tmp_path):
    data = {"a": np.float64(1.5), "b": np.arange(3), "c": math.nan, "d": np.bool_(True), "e": None}
    out = json.loads(write_json(tmp_path / "x.json", data).read_text())
    assert out["a"] == 1.5 and out["b"] == [0, 1, 2] and out["d"] is True and out["e"] is None
    assert out["c"] is None
