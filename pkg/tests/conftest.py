from __future__ import annotations

import time
from contextlib import contextmanager

import pytest

# criterion number -> (title, verdict, detail)
ACCEPTANCE: dict[int, tuple[str, str, str]] = {}


@contextmanager
def _record(number: int, title: str):
    start = time.perf_counter()
    notes: list[str] = []
    try:
        yield notes
    except BaseException as exc:
        msg = str(exc).strip().splitlines()[0] if str(exc).strip() else type(exc).__name__
        ACCEPTANCE[number] = (title, "FAIL", f"{msg} ({time.perf_counter() - start:.1f} s)")
        print(f"criterion {number}: FAIL  {title}: {msg}")
        raise
    detail = "; ".join(notes)
    ACCEPTANCE[number] = (title, "PASS", f"{detail} ({time.perf_counter() - start:.1f} s)")
    print(f"criterion {number}: PASS  {title}: {detail}")


@pytest.fixture
def criterion():
    """``with criterion(n, title) as notes:`` records one verdict line."""
    return _record


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE):
        title, verdict, detail = ACCEPTANCE[n]
        terminalreporter.write_line(f"criterion {n:2d}: {verdict}  {title}: {detail}")
