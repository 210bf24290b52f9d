import numpy as np
import pytest

from skewprod.interval_maps import (
    G1,
    G2,
    MapFamily,
    drift_family,
    inverse_kan_family,
    kan_family,
    onoff_family,
    symmetric_walk,
)

BUILTIN_FAMILIES = {
    "symmetric_walk": symmetric_walk(),
    "kan": kan_family(),
    "inverse_kan": inverse_kan_family(),
    "onoff": onoff_family(),
    "drift": drift_family(),
}


@pytest.fixture(params=sorted(BUILTIN_FAMILIES))
def builtin_family(request):
    return BUILTIN_FAMILIES[request.param]


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":").split(".")[0])):
            terminalreporter.write_line(line)
