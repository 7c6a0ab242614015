import numpy as np
import pytest

from thermolab.dynamics import A0, CAT2, LinearMap, ManeMap

ACCEPTANCE_LINES = []


@pytest.fixture(scope="session")
def a0():
    return LinearMap(A0)


@pytest.fixture(scope="session")
def a0inv():
    return LinearMap(A0).inverted()


@pytest.fixture(scope="session")
def cat2():
    return LinearMap(CAT2)


@pytest.fixture(scope="session")
def mane():
    base = LinearMap(A0)
    return {th: ManeMap(base, th) for th in (0.03, -0.05, -0.1)}


@pytest.fixture
def x0():
    return np.array([0.1, 0.2, 0.3])


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
