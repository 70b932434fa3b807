"""Shared pytest configuration.

Tests marked ``@pytest.mark.acceptance(n, title)`` are collected into a
pass/fail table printed at the end of the session, one line per criterion.
"""

from __future__ import annotations

import logging

import pytest

_RESULTS: dict[int, tuple[str, str]] = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "acceptance(number, title): numbered acceptance criterion")
    logging.getLogger("tepstore").setLevel(logging.WARNING)


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    marker = item.get_closest_marker("acceptance")
    if marker is None:
        return
    number, title = marker.args
    failed = report.failed
    if report.when == "call" or (report.when == "setup" and failed):
        verdict = "FAIL" if failed else ("SKIP" if report.skipped else "PASS")
        line = f"ACCEPTANCE {number:>2} {verdict}  {title}"
        _RESULTS[number] = (verdict, line)
        print(f"\n{line}")


def pytest_terminal_summary(terminalreporter):
    if not _RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_RESULTS):
        terminalreporter.write_line(_RESULTS[number][1])
