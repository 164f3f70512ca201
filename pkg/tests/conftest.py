import sys
import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from dampedns.spectral import Grid

settings.register_profile(
    "default", max_examples=25, deadline=None, suppress_health_check=[HealthCheck.too_slow]
)
settings.load_profile("default")


@pytest.fixture
def grid8():
    return Grid.cube(8)


@pytest.fixture
def grid16():
    return Grid.cube(16)


@pytest.fixture
def aniso_grid():
    # unequal sizes and box lengths catch axis mix-ups
    return Grid((8, 12, 6), (2 * np.pi, 3.0, 5.0))


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    if mod is not None and mod.RESULTS:
        terminalreporter.section("acceptance criteria")
        for line in mod.RESULTS:
            terminalreporter.write_line(line)
