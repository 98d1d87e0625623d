import numpy as np
import pytest

from netmfplus import from_edges
from netmfplus.synthetic import erdos_renyi

# criterion id -> (passed, detail); filled in by test_acceptance.py
ACCEPTANCE = {}


def record(criterion: str, passed: bool, detail: str) -> None:
    ACCEPTANCE[criterion] = (bool(passed), detail)


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(ACCEPTANCE):
        ok, detail = ACCEPTANCE[key]
        terminalreporter.write_line(f"{key} {'PASS' if ok else 'FAIL'}  {detail}")


@pytest.fixture
def triangle():
    return from_edges([(0, 1), (1, 2), (2, 0)])


@pytest.fixture
def single_edge():
    return from_edges([(0, 1)])


@pytest.fixture(scope="session")
def er300():
    return erdos_renyi(300, 0.05, seed=0)


@pytest.fixture(scope="session")
def er50():
    return erdos_renyi(50, 0.2, seed=3)


def rel_fro(a, b) -> float:
    return float(np.linalg.norm(a - b) / np.linalg.norm(b))
