"""Per-criterion PASS/FAIL lines for tests marked ``acceptance(criterion, title)``."""

import pytest

_results: dict[int, dict] = {}


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    mark = item.get_closest_marker("acceptance")
    if mark is None:
        return
    criterion, title = mark.args
    entry = _results.setdefault(criterion, {"title": title, "ok": True, "tests": set()})
    entry["tests"].add(item.nodeid)
    if report.failed or (report.when == "call" and report.skipped):
        entry["ok"] = False


def pytest_terminal_summary(terminalreporter):
    if not _results:
        return
    terminalreporter.section("acceptance criteria")
    for criterion in sorted(_results):
        entry = _results[criterion]
        status = "PASS" if entry["ok"] else "FAIL"
        terminalreporter.write_line(f"criterion {criterion}: {status}  {entry['title']} ({len(entry['tests'])} tests)")
