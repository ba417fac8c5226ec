import pytest

from pinnbarrier.scenarios import FdProvider

ACCEPTANCE_LINES: list[str] = []


@pytest.fixture(scope="session")
def provider():
    """One FD cache for the whole session (pseudo-time marching, default settings)."""
    return FdProvider()


@pytest.fixture(scope="session")
def acceptance_log():
    return ACCEPTANCE_LINES


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
