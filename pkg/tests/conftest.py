import numpy as np
import pytest

from ppcfit.fitting import desk_grid, precompute_library

ACCEPTANCE_LINES = []


@pytest.fixture(scope="session")
def desk():
    return desk_grid()


@pytest.fixture(scope="session")
def desk_libraries(desk):
    """Desk-scale libraries (4**5 cells, 500 trials), built lazily per decoder."""
    cache = {}

    def get(kind):
        if kind not in cache:
            cache[kind] = precompute_library(desk, kind, 500, seed=0)
        return cache[kind]

    return get


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
