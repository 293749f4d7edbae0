import time

import numpy as np
import pytest

from bnreduce.green import Ball, BallGreen, Generic, MFSGreen
from bnreduce.radial import sweep
from bnreduce.reduced import ProblemParams

# one line per acceptance criterion, printed again in the terminal summary
ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


@pytest.fixture(scope="session")
def ball3():
    return BallGreen(Ball.unit(3))


@pytest.fixture(scope="session")
def ball5():
    return BallGreen(Ball.unit(5))


@pytest.fixture(scope="session")
def mfs3():
    return MFSGreen(Generic.sphere(3, 1600))


@pytest.fixture(scope="session")
def sweep_n5():
    """Default blow-up sweep: N=5, q=3, 16 peak values on [10, 1e4]."""
    params = ProblemParams(5, 3.0)
    t = time.perf_counter()
    entries = sweep(params, np.geomspace(10.0, 1e4, 16), threads=4)
    return params, entries, time.perf_counter() - t


@pytest.fixture(scope="session")
def sweep_n6():
    params = ProblemParams(6, 2.4)
    t = time.perf_counter()
    entries = sweep(params, np.geomspace(1e2, 1e6, 16), threads=4)
    return params, entries, time.perf_counter() - t
