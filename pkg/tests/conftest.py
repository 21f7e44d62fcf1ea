"""Shared test plumbing: the end-to-end criteria report.

The tests in test_acceptance.py each record one PASS/FAIL line through the
``criterion`` fixture; those lines are echoed in a dedicated section of the
terminal summary so the run's verdict is readable at a glance even when
captured output is hidden.
"""

import pytest

_CRITERION_LINES = []


@pytest.fixture
def criterion():
    """Record a one-line verdict for an acceptance criterion, then enforce it."""

    def record(name: str, ok: bool, detail: str) -> None:
        line = f"{'PASS' if ok else 'FAIL'} — {name}: {detail}"
        _CRITERION_LINES.append(line)
        assert ok, line

    return record


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if _CRITERION_LINES:
        terminalreporter.section("acceptance criteria")
        for line in _CRITERION_LINES:
            terminalreporter.write_line(line)
