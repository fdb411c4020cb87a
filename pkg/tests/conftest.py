import numpy as np
import pytest


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def unit(k, M):
    e = np.zeros(M, dtype=complex)
    e[k] = 1.0
    return e


def pytest_terminal_summary(terminalreporter):
    try:
        from test_acceptance import LINES
    except ImportError:
        return
    if LINES:
        terminalreporter.section("acceptance criteria")
        for line in LINES:
            terminalreporter.write_line(line)
