"""Collect acceptance-test outcomes and print one verdict line per criterion."""

from __future__ import annotations

import sys
from pathlib import Path

import pytest

ROOT = Path(__file__).resolve().parent.parent
if str(ROOT) not in sys.path:
    sys.path.insert(0, str(ROOT))

_OUTCOMES: dict[int, list[bool]] = {}
_TITLES: dict[int, str] = {}


def pytest_collection_modifyitems(items):
    for item in items:
        marker = item.get_closest_marker("acceptance")
        if marker:
            n = marker.args[0]
            _TITLES.setdefault(n, marker.kwargs.get("title", ""))
            _OUTCOMES.setdefault(n, [])


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    marker = item.get_closest_marker("acceptance")
    if marker is None:
        return
    n = marker.args[0]
    if report.when == "call" or (report.when == "setup" and not report.passed):
        _OUTCOMES.setdefault(n, []).append(report.passed)


def pytest_terminal_summary(terminalreporter):
    if not _OUTCOMES:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(_OUTCOMES):
        results = _OUTCOMES[n]
        verdict = "PASS" if results and all(results) else "FAIL"
        if not results:
            verdict = "NOT RUN"
        terminalreporter.write_line(f"ACCEPTANCE {n:>2} {verdict}: {_TITLES.get(n, '')} ({len(results)} checks)")
