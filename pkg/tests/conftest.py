import numpy as np
import pytest

from mfginv import SpaceField, TorusGrid


@pytest.fixture(scope="session")
def grid1():
    return TorusGrid(1, 32, 0.1, 400)


@pytest.fixture(scope="session")
def grid2():
    return TorusGrid(2, 16, 0.05, 200)


def small_density(grid, amp=0.02, xi=1, offset=0.01, phase=0.0):
    x = grid.nodes[0]
    return SpaceField(grid, amp * np.cos(2 * np.pi * xi * x + phase) + offset)


# criterion number -> (passed, detail); filled by test_acceptance.py
ACCEPTANCE = {}


def record_criterion(k, passed, detail):
    ACCEPTANCE[k] = (bool(passed), detail)
    print(f"criterion {k}: {'PASS' if passed else 'FAIL'} | {detail}")


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.write_sep("=", "acceptance criteria")
    for k in sorted(ACCEPTANCE):
        passed, detail = ACCEPTANCE[k]
        terminalreporter.write_line(f"criterion {k}: {'PASS' if passed else 'FAIL'} | {detail}")
