import sys

import pytest
from hypothesis import HealthCheck, settings

from ecpart.golden import load_fixture

settings.register_profile("ecpart", deadline=None, suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("ecpart")


@pytest.fixture(scope="session")
def f1_module():
    return load_fixture("f1.mir")


@pytest.fixture(scope="session")
def f2_module():
    return load_fixture("f2.mir")


@pytest.fixture(scope="session")
def f3_module():
    return load_fixture("f3.mir")


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    if mod is not None and mod.RESULTS:
        terminalreporter.section("acceptance criteria")
        for line in sorted(mod.RESULTS, key=lambda s: s.split("criterion")[1]):
            terminalreporter.write_line(line)
