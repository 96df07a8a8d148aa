import pytest

from renewal_zero import interarrival as ia
from renewal_zero import renewal_exact as rx


@pytest.fixture(scope="session")
def d0_big():
    return ia.d0(100_000)


@pytest.fixture(scope="session")
def u_d0(d0_big):
    return rx.renewal_mass(d0_big)


@pytest.fixture(scope="session")
def d0_small():
    return ia.d0(2000)


_ACCEPTANCE_LINES = []


@pytest.fixture(scope="session")
def acceptance_log():
    return _ACCEPTANCE_LINES


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in _ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
