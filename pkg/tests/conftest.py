from __future__ import annotations

import pytest

RESULTS: dict = {}


@pytest.fixture
def record():
    """Store one acceptance line; the lines are printed at the end of the run."""
    def put(number: int, ok: bool, detail: str) -> None:
        RESULTS[number] = f"criterion {number:2d}: {'PASS' if ok else 'FAIL'}  {detail}"
        print(RESULTS[number])
    return put


def pytest_terminal_summary(terminalreporter):
    if RESULTS:
        terminalreporter.section("acceptance criteria")
        for k in sorted(RESULTS):
            terminalreporter.write_line(RESULTS[k])
