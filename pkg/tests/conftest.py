import numpy as np
import pytest

from irsshare.harness import draw_drop, gaussian_channels, unit_budget
from irsshare.scenario import Scenario, derive_link_budget

# lines printed by the acceptance module, echoed in the terminal summary
ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


@pytest.fixture
def scenario():
    return Scenario()


@pytest.fixture
def budget(scenario):
    return derive_link_budget(scenario)


@pytest.fixture
def drop(scenario, budget):
    """Users and channels of drop 0 for the default five-operator scenario."""
    return draw_drop(scenario, budget, seed=7, drop=0)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def toy():
    """Three Gaussian users on 16 elements with P/sigma^2 = 2."""
    channels = gaussian_channels(np.random.default_rng(3), 3, 16)
    return channels, unit_budget(2.0)
