import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

_criteria = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(number, title): acceptance criterion checked by this test")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    mark = item.get_closest_marker("criterion")
    if mark is None:
        return
    number, title = mark.args
    entry = _criteria.setdefault(number, {"title": title, "ok": True, "ran": False, "why": ""})
    if rep.when == "call":
        entry["ran"] = True
    if rep.failed:
        entry["ok"] = False
        entry["why"] = rep.longrepr.reprcrash.message if hasattr(rep.longrepr, "reprcrash") else str(rep.longrepr)


def pytest_terminal_summary(terminalreporter):
    if not _criteria:
        return
    tr = terminalreporter
    tr.section("acceptance criteria")
    for number in sorted(_criteria):
        c = _criteria[number]
        status = "PASS" if c["ok"] and c["ran"] else "FAIL"
        line = f"criterion {number}: {status}  {c['title']}"
        if status == "FAIL" and c["why"]:
            line += f"  ({c['why'].splitlines()[0][:160]})"
        tr.write_line(line)
