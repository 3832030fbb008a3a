import numpy as np
import pytest

from ocmsd.envarray import DepthGrid, yellow_sea_scenario
from ocmsd.modesolver import reference_mode_set


@pytest.fixture(scope="session")
def scenario():
    return yellow_sea_scenario()


@pytest.fixture(scope="session")
def grid(scenario):
    return DepthGrid.for_environment(scenario.env, scenario.source.frequency)


@pytest.fixture(scope="session")
def band(scenario):
    return scenario.search_band()


@pytest.fixture(scope="session")
def reference(scenario, grid):
    return reference_mode_set(scenario.env, grid, scenario.source.frequency)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
