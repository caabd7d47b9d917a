import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from arisee.config import ScenarioConfig, db_to_linear, desk_scenario

settings.register_profile("default", deadline=None, max_examples=60,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


@pytest.fixture
def desk():
    return desk_scenario(direct_loss=db_to_linear(-70.0))


@pytest.fixture
def rng():
    return np.random.default_rng(2024)


@pytest.fixture
def tiny():
    return ScenarioConfig(n_ues=2, n_aris=1, n_elements=2, n_antennas=2, phase_bits=1)


ACCEPTANCE_LINES: list = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
