import numpy as np
import pytest

from flim.channel import channel_matrix
from flim.geometry import SceneConfig


@pytest.fixture(scope="session")
def centre_channel():
    """Perturbed receiver at the cell centre with the reference parameters."""
    return channel_matrix(SceneConfig())


@pytest.fixture(scope="session")
def square_centre_channel():
    return channel_matrix(SceneConfig(receiver_kind="square"))


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


ACCEPTANCE_LINES: list[str] = []


@pytest.fixture
def report():
    """Record one PASS/FAIL line for an acceptance criterion."""

    def _report(criterion: str, passed: bool, detail: str) -> bool:
        line = f"[{'PASS' if passed else 'FAIL'}] {criterion}: {detail}"
        ACCEPTANCE_LINES.append(line)
        print(line)
        return passed

    return _report


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
