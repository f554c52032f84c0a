from __future__ import annotations

import pytest

_LINES: dict = {}


@pytest.fixture
def acceptance():
    """``acceptance(n, ok, detail)`` records one criterion verdict, then asserts it."""
    def record(n: int, ok: bool, detail: str) -> None:
        line = f"criterion {n:2d}: {'PASS' if ok else 'FAIL'}  {detail}"
        _LINES[n] = line
        print(line)
        assert ok, line
    return record


def pytest_terminal_summary(terminalreporter):
    if not _LINES:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(_LINES):
        terminalreporter.write_line(_LINES[n])
