import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

_LINES: list = []


@pytest.fixture
def verdict():
    """Record one acceptance line; the terminal summary prints them all."""

    def record(number: int, ok: bool, detail: str = ""):
        line = f"criterion {number:2d}: {'PASS' if ok else 'FAIL'}" + (f"  {detail}" if detail else "")
        _LINES.append(line)
        print(line)
        return ok

    return record


def pytest_terminal_summary(terminalreporter):
    if _LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(_LINES):
            terminalreporter.write_line(line)
