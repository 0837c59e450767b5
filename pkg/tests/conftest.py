import os

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from czlab.measure import AtomicMeasure, DensityVector, GrowthProfile

settings.register_profile(
    "default", max_examples=int(os.environ.get("CZLAB_HYPOTHESIS_EXAMPLES", "60")),
    deadline=None, suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


@pytest.fixture
def three_atoms():
    """Atoms 0, 1, 3 on the line with weights 1, 2, 4."""
    return AtomicMeasure([[0.0], [1.0], [3.0]], [1.0, 2.0, 4.0], GrowthProfile(1.0, 8.0, 0.5))


@pytest.fixture
def spike():
    return DensityVector(np.array([10.0, 0.0, 0.0]))


def pytest_terminal_summary(terminalreporter):
    from _report import LINES
    if LINES:
        terminalreporter.section("acceptance criteria")
        for num in sorted(LINES):
            terminalreporter.write_line(LINES[num])
