import pytest

from rigplan.model import load_bundled

ACCEPTANCE_LINES: list[str] = []


@pytest.fixture(scope="session")
def bundled():
    return load_bundled()


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
