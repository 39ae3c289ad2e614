import pytest

_LINES: list[str] = []


@pytest.fixture
def acceptance(capsys):
    """Record one pass/fail line for a criterion and assert on it."""

    def report(number: int, name: str, ok: bool, detail: str, seconds: float | None = None):
        took = "" if seconds is None else f" [{seconds:.1f} s]"
        line = f"criterion {number:2d} {'PASS' if ok else 'FAIL'}: {name}: {detail}{took}"
        _LINES.append(line)
        with capsys.disabled():
            print("\n" + line)
        assert ok, line

    return report


def pytest_terminal_summary(terminalreporter):
    if _LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(_LINES):
            terminalreporter.write_line(line)
