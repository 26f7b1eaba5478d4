import numpy as np
import pytest

from ferrolamb.circuit import ModalBranch, ResonatorModel


@pytest.fixture
def two_mode_model():
    return ResonatorModel(1e-12, 0.0, (ModalBranch(300e6, 0.08, 150.0), ModalBranch(700e6, 0.03, 150.0)))


@pytest.fixture
def wide_grid():
    return np.linspace(0.1e9, 1.0e9, 20001)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    try:
        from test_acceptance import RESULTS
    except ImportError:
        return
    if RESULTS:
        terminalreporter.section("acceptance criteria")
        for line in RESULTS:
            terminalreporter.write_line(line)
