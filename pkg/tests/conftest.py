import time

import numpy as np
import pytest

from optfabrics.arm import default_arm
from optfabrics.runner import run_episodes
from optfabrics.scenario import load_scenario, shipped_scenario_path


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def arm3():
    return default_arm(3)


@pytest.fixture
def arm2():
    return default_arm(2)


@pytest.fixture(scope="session")
def reach_scenario():
    return load_scenario(shipped_scenario_path("reach"))


@pytest.fixture(scope="session")
def shaping_scenario():
    return load_scenario(shipped_scenario_path("shaping"))


def _timed(fn):
    start = time.perf_counter()
    out = fn()
    return out, time.perf_counter() - start


@pytest.fixture(scope="session")
def reach_runs(reach_scenario):
    """Episodes of the reaching demo and its wall time."""
    return _timed(lambda: run_episodes(reach_scenario))


@pytest.fixture(scope="session")
def redundancy_runs():
    """The reaching goals with the default-configuration term switched off."""
    return _timed(lambda: run_episodes(load_scenario(shipped_scenario_path("redundancy"))))


@pytest.fixture(scope="session")
def shaping_runs(shaping_scenario):
    return _timed(lambda: run_episodes(shaping_scenario))
