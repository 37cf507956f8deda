import pytest

from ism_haptics import default_model

_ACCEPTANCE = []


@pytest.fixture(scope="session")
def model():
    return default_model()


@pytest.fixture
def acceptance():
    """Records one pass/fail line per acceptance criterion."""

    def record(number: int, name: str, passed: bool, detail: str):
        line = f"[{'PASS' if passed else 'FAIL'}] criterion {number}: {name}: {detail}"
        _ACCEPTANCE.append(line)
        print(line)
        return passed

    return record


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for line in sorted(_ACCEPTANCE, key=lambda s: int(s.split()[2].rstrip(":"))):
            terminalreporter.write_line(line)
