"""Collects acceptance outcomes and prints one PASS/FAIL line per criterion."""

from __future__ import annotations

from collections import defaultdict

import pytest

_outcomes: dict[int, list[bool]] = defaultdict(list)
_details: dict[int, list[str]] = defaultdict(list)


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(n): acceptance criterion number n")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    marker = item.get_closest_marker("criterion")
    if marker is None:
        return
    n = marker.args[0]
    if rep.when == "call" or (rep.when == "setup" and not rep.passed):
        _outcomes[n].append(rep.passed)
        if rep.when == "call":
            _details[n].extend(str(v) for k, v in item.user_properties if k == "detail")


def pytest_terminal_summary(terminalreporter):
    if not _outcomes:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(_outcomes):
        status = "PASS" if all(_outcomes[n]) else "FAIL"
        extra = "; ".join(_details[n])
        terminalreporter.write_line(f"criterion {n}: {status}" + (f"  ({extra})" if extra else ""))
