import pytest
from hypothesis import HealthCheck, settings

from fhartree import set_threads
from fhartree.ground_state import petviashvili_solve
from fhartree.spectral import Grid

settings.register_profile("default", deadline=None, max_examples=25,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")

ACCEPTANCE_LINES = []


@pytest.fixture(autouse=True, scope="session")
def _single_thread():
    set_threads(1)


@pytest.fixture(scope="session")
def ground_state_64():
    """Mass-critical ground state (gamma = 1, sigma = 1/2) on the M = 64, L = 16 grid."""
    return petviashvili_solve(1.0, 0.5, Grid(3, 64, 16.0), tol=1e-9)


@pytest.fixture
def report():
    def emit(line):
        print(line)
        ACCEPTANCE_LINES.append(line)
    return emit


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
