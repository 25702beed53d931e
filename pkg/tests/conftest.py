import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

_criteria: dict[int, dict] = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(number, title): acceptance criterion check")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    marker = item.get_closest_marker("criterion")
    if marker is None or (report.when != "call" and report.passed):
        return
    number, title = marker.args
    entry = _criteria.setdefault(number, {"title": title, "passed": True, "details": []})
    entry["passed"] &= report.passed
    entry["details"].extend(str(v) for k, v in item.user_properties if k == "detail")


def pytest_terminal_summary(terminalreporter):
    if not _criteria:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_criteria):
        entry = _criteria[number]
        status = "PASS" if entry["passed"] else "FAIL"
        detail = "; ".join(dict.fromkeys(entry["details"]))
        terminalreporter.write_line(f"[{status}] criterion {number}: {entry['title']}" + (f" | {detail}" if detail else ""))
