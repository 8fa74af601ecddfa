import numpy as np
import pytest

from hatlab.green import default_table


@pytest.fixture(scope="session")
def G5():
    return default_table(5)


@pytest.fixture(scope="session")
def G3():
    return default_table(3)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_configure(config):
    config._acceptance_lines = []


@pytest.fixture(scope="session")
def acceptance(request):
    """Collects one PASS/FAIL line per acceptance criterion for the final
    terminal summary."""
    lines = request.config._acceptance_lines
    return lines.append


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = getattr(config, "_acceptance_lines", [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
