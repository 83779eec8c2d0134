import pytest

# one "CRITERION k: PASS|FAIL ..." line per acceptance criterion, in run order
ACCEPTANCE_LINES = []


@pytest.fixture
def verdict(capsys):
    """Record and print an acceptance verdict line, then assert on it."""

    def record(number: int, ok: bool, detail: str, seconds: float):
        line = f"CRITERION {number:>2}: {'PASS' if ok else 'FAIL'}  ({seconds:.1f} s)  {detail}"
        ACCEPTANCE_LINES.append(line)
        with capsys.disabled():
            print("\n" + line)
        assert ok, detail

    return record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
