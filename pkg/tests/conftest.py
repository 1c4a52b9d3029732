import pytest

CRITERIA = []


@pytest.fixture
def criterion(request):
    """Record one acceptance line; call with (label, passed, detail)."""

    def record(label, passed, detail=""):
        CRITERIA.append((label, bool(passed), detail))
        return passed

    return record


def pytest_terminal_summary(terminalreporter):
    if not CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for label, passed, detail in CRITERIA:
        terminalreporter.write_line(f"{'PASS' if passed else 'FAIL'}  {label}  {detail}")
