import sys

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from hresolvent.fields import builtin_family
from hresolvent.quadrature import Quadrature

settings.register_profile("default", deadline=None, max_examples=25,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


@pytest.fixture(scope="session")
def q2():
    return Quadrature.from_preset(2, "fast")


@pytest.fixture(scope="session")
def q2std():
    return Quadrature.from_preset(2, "standard")


@pytest.fixture(scope="session")
def family2():
    return builtin_family(2, 0, 20)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    if mod is None or not mod.RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(mod.RESULTS):
        terminalreporter.write_line(mod.RESULTS[n])
