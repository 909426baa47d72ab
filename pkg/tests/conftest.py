from __future__ import annotations

from collections import OrderedDict

import pytest

_OUTCOMES: "OrderedDict[int, dict]" = OrderedDict()


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(number, title): acceptance criterion covered by the test")


def pytest_runtest_logreport(report):
    marker = getattr(report, "criterion", None)
    if marker is None:
        return
    number, title = marker
    entry = _OUTCOMES.setdefault(number, {"title": title, "failed": [], "ran": 0, "skipped": 0, "measured": []})
    if report.when == "call":
        entry["measured"] += [str(v) for k, v in report.user_properties if k == "measured"]
    if report.when == "call" or (report.when == "setup" and report.outcome != "passed"):
        if report.skipped:
            entry["skipped"] += 1
        else:
            entry["ran"] += 1
            if report.failed:
                entry["failed"].append(report.nodeid.split("::")[-1])


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    marker = item.get_closest_marker("criterion")
    if marker is not None:
        outcome.get_result().criterion = tuple(marker.args)


def pytest_terminal_summary(terminalreporter):
    if not _OUTCOMES:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_OUTCOMES):
        e = _OUTCOMES[number]
        if e["ran"] == 0:
            status = "SKIP"
        else:
            status = "FAIL" if e["failed"] else "PASS"
        detail = f" (failed: {', '.join(e['failed'])})" if e["failed"] else ""
        terminalreporter.write_line(f"criterion {number}: {status} - {e['title']}{detail}")
        for line in e["measured"]:
            terminalreporter.write_line(f"    {line}")
