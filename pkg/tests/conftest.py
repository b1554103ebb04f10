import numpy as np
import pytest

from chc.field import GridSpec


@pytest.fixture
def rng():
    return np.random.default_rng(20240501)


@pytest.fixture
def unit_grid():
    return GridSpec(32, 32, 1.0, 1.0)


@pytest.fixture
def rect_grid():
    return GridSpec(16, 24, 1.7, 0.9)


@pytest.fixture
def box_grid():
    """Square of side 2 pi at modest resolution, used by the solver tests."""
    return GridSpec(32, 32, 2 * np.pi, 2 * np.pi)


ACCEPTANCE = []


def record_acceptance(number, name, ok, detail):
    ACCEPTANCE.append((number, name, ok, detail))


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number, name, ok, detail in sorted(ACCEPTANCE):
        terminalreporter.write_line(f"[{'PASS' if ok else 'FAIL'}] {number}. {name}: {detail}")
