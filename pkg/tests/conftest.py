import pytest

_CRITERION_LINES = []


@pytest.fixture
def criterion():
    """Record one pass/fail line per acceptance criterion for the summary."""

    def record(num, ok, detail):
        _CRITERION_LINES.append(f"criterion {num}: {'PASS' if ok else 'FAIL'} ({detail})")
        assert ok, f"criterion {num} failed: {detail}"

    return record


def pytest_terminal_summary(terminalreporter):
    if _CRITERION_LINES:
        terminalreporter.write_sep("-", "acceptance criteria")
        for line in sorted(_CRITERION_LINES):
            terminalreporter.write_line(line)
