import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from radnls.evolve import EvolveConfig, evolve  # noqa: E402
from radnls.grid import make_grid  # noqa: E402
from radnls.groundstate import shoot_ground_state  # noqa: E402
from radnls.variational import rescale_to_unit  # noqa: E402

ACCEPTANCE_LINES: list[str] = []

_GS_CACHE = {}


def ground_state(p):
    if p not in _GS_CACHE:
        _GS_CACHE[p] = shoot_ground_state(p)
    return _GS_CACHE[p]


@pytest.fixture(scope="session")
def gs():
    """Callable returning the cached default-grid ground state for p."""
    return ground_state


@pytest.fixture(scope="session")
def subthreshold_run():
    """Normalized Gaussian data, p = 3, evolved to T = 10."""
    grid = make_grid(100.0, 4000)
    u0 = grid.sample(lambda r: np.exp(-r * r))
    v0, lam = rescale_to_unit(u0, 3.0)
    traj = evolve(v0, EvolveConfig(dt=0.0025, t_end=10.0, p=3.0, snapshot_stride=4))
    return v0, lam, traj


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
