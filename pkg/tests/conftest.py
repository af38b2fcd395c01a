import json
import pathlib

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from lemlab.poly import RootedPolynomial

settings.register_profile("lemlab", deadline=None, max_examples=40,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("lemlab")

FIXTURES = pathlib.Path(__file__).parent / "fixtures"
ACCEPTANCE_LINES = []


def poly(*roots):
    return RootedPolynomial(np.array(roots, dtype=complex))


@pytest.fixture(scope="session")
def thresholds():
    return json.loads((FIXTURES / "pilot_thresholds.json").read_text())


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
