"""Shared fixtures and the acceptance-criterion summary printed after the run."""
import numpy as np
import pytest

from hawkessv.model import table2_params
from hawkessv.simulate import SimConfig, simulate

#: criterion number -> (passed, detail); filled by tests/test_acceptance.py
CRITERIA: dict = {}


def record(number: int, passed: bool, detail: str) -> None:
    CRITERIA[number] = (bool(passed), detail)
    print(f"criterion {number}: {'PASS' if passed else 'FAIL'} {detail}")


def pytest_terminal_summary(terminalreporter):
    if not CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(CRITERIA):
        ok, detail = CRITERIA[k]
        terminalreporter.write_line(f"criterion {k}: {'PASS' if ok else 'FAIL'} {detail}")


@pytest.fixture(scope="session")
def m2_small():
    """300 simulated days from the M2 variant at the reference parameters."""
    data, lat, _ = simulate(SimConfig(300, table2_params("M2"), seed=11))
    return data, lat


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
