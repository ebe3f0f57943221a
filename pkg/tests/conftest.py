import pytest

CRITERIA_RESULTS = {}


@pytest.fixture
def criterion():
    """Record a numbered acceptance result; the summary prints one line per criterion."""

    def record(number: int, passed: bool, detail: str):
        CRITERIA_RESULTS[number] = (bool(passed), detail)
        return passed

    return record


def pytest_terminal_summary(terminalreporter):
    if not CRITERIA_RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(CRITERIA_RESULTS):
        passed, detail = CRITERIA_RESULTS[number]
        terminalreporter.write_line(
            f"criterion {number:2d}: {'PASS' if passed else 'FAIL'}  {detail}")
