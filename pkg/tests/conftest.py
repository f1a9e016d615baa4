import pytest

_CRITERIA: dict[int, list[str]] = {}


@pytest.fixture
def report_criterion():
    """Record (and print) one pass/fail line for an acceptance criterion."""

    def record(number: int, passed: bool | None, detail: str) -> None:
        status = "REPORT" if passed is None else ("PASS" if passed else "FAIL")
        line = f"criterion {number:>2}: {status:<6} {detail}"
        _CRITERIA.setdefault(number, []).append(line)
        print(line)

    return record


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_CRITERIA):
        for line in _CRITERIA[number]:
            terminalreporter.write_line(line)
