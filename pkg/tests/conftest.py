import numpy as np
import pytest

from ldempc import presets


@pytest.fixture(scope="session")
def graph():
    return presets.graph()


@pytest.fixture(scope="session")
def osc():
    return presets.oscillator()


@pytest.fixture(scope="session")
def growth():
    return presets.growth()


@pytest.fixture(scope="session")
def x01(osc):
    return presets.oscillator_x01(osc)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def pytest_terminal_summary(terminalreporter):
    import sys

    mod = sys.modules.get("test_acceptance") or sys.modules.get("tests.test_acceptance")
    if mod is None or not mod.RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(mod.RESULTS):
        terminalreporter.write_line(mod.RESULTS[n])
