import math

import pytest

from nonrecip.model import ModelParams

# pass/fail lines collected by test_acceptance.py, echoed in the terminal summary
ACCEPTANCE_LINES = []


@pytest.fixture
def fig2c():
    """Couplings shared by panels (a), (b), (c), (e), (f)."""
    return ModelParams(g=1.0, g_b=0.3, phi=2 * math.pi / 3, delta_c=0.0, delta_b=-0.5, kappa=0.25)


@pytest.fixture
def fig2d():
    return ModelParams(g_b=0.1, kappa=0.1, delta_b=-1.0, gamma=0.5, n_sites=30)


@pytest.fixture
def fig2e():
    return ModelParams(gamma=0.5, beta=100.0)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
