import pytest
from hypothesis import HealthCheck, settings

from markovlr.presets import dissipative_ising

settings.register_profile("repo", deadline=None, max_examples=40,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("repo")


@pytest.fixture(scope="session")
def ising8():
    return dissipative_ising(8)


@pytest.fixture(scope="session")
def ising3():
    return dissipative_ising(3)


ACCEPTANCE = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(ACCEPTANCE):
        terminalreporter.write_line(ACCEPTANCE[key])
