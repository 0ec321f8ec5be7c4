import numpy as np
import pytest

from sdobs.design import design_linear
from sdobs.plants import oscillator_preset

P_REF = 0.5 * np.array([[5.0, -2.0], [-2.0, 1.0]])
X0 = np.array([0.0, 2.0])
Z0 = np.array([1.0, 1.0])


@pytest.fixture(scope="session")
def osc():
    return oscillator_preset()


@pytest.fixture(scope="session")
def osc_ref_design(osc):
    return design_linear(osc, [-4.0, 0.0], mu=1.0, gamma=64 / 3, P=P_REF)


def tail_amplitude(times, values, start):
    m = times >= start
    return float((values[m].max() - values[m].min()) / 2)


ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
