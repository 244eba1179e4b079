import sys

import numpy as np
import pytest
from hypothesis import settings

from sipservo import harness, phantom

settings.register_profile("default", max_examples=60, deadline=None)
settings.load_profile("default")


@pytest.fixture(scope="session")
def model():
    return phantom.PhantomModel()


@pytest.fixture(scope="session")
def spec():
    return phantom.ImageSpec()


@pytest.fixture(scope="session")
def template(model, spec):
    return harness.sip_template(model, spec)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def pytest_terminal_summary(terminalreporter):
    """Print the acceptance PASS/FAIL lines after the run."""
    results = getattr(sys.modules.get("test_acceptance"), "RESULTS", None)
    if not results:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(results):
        terminalreporter.write_line(results[n])
