import pytest

from toadwave.grid import make_trait_grid
from toadwave.params import ModelParams
from toadwave.spectral import minimize_speed

ACCEPTANCE_LINES: list[str] = []


@pytest.fixture(scope="session")
def params():
    return ModelParams()


@pytest.fixture(scope="session")
def min_speed_400(params):
    return minimize_speed(1.0, params, make_trait_grid(1.0, 2.0, 400))


@pytest.fixture(scope="session")
def min_speed_21(params):
    return minimize_speed(1.0, params, make_trait_grid(1.0, 2.0, 21))


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
