import numpy as np
import pytest

from stldecomp.decompose import decompose
from stldecomp.scenario import load_scenario


@pytest.fixture(scope="session")
def formation():
    return load_scenario("formation8.scn")


@pytest.fixture(scope="session")
def formation_result(formation):
    return decompose(formation.spec(), formation.comm_graph(), formation.decompose_options())


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


#: one line per acceptance criterion, filled by tests/test_acceptance.py
ACCEPTANCE_LINES = {}


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for k in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(ACCEPTANCE_LINES[k])
