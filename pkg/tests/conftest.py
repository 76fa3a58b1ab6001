import json
from collections import OrderedDict
from pathlib import Path

import pytest

ORACLES = json.loads((Path(__file__).parent / "oracles" / "frozen.json").read_text())

_criteria: "OrderedDict[str, dict]" = OrderedDict()


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(id, title): acceptance criterion this test belongs to")


def pytest_collection_modifyitems(items):
    for item in items:
        m = item.get_closest_marker("criterion")
        if m is not None:
            cid, title = m.args
            entry = _criteria.setdefault(cid, {"title": title, "outcomes": []})
            entry.setdefault("nodes", []).append(item.nodeid)


def pytest_runtest_logreport(report):
    for cid, entry in _criteria.items():
        if report.nodeid in entry["nodes"] and (report.when == "call" or report.outcome != "passed"):
            entry["outcomes"].append((report.nodeid.split("::")[-1], report.outcome))


def pytest_terminal_summary(terminalreporter):
    if not _criteria:
        return
    terminalreporter.section("acceptance criteria")
    order = sorted(_criteria, key=lambda c: int(c[2:]))
    for cid in order:
        entry = _criteria[cid]
        outs = entry["outcomes"]
        if not outs:
            status = "NOT RUN"
        elif all(o == "passed" for _, o in outs):
            status = "PASS"
        else:
            status = "FAIL"
        failed = [n for n, o in outs if o != "passed"]
        tail = f"  (failed: {', '.join(failed)})" if failed else ""
        terminalreporter.write_line(f"{cid:>4} {status:<7} {entry['title']}{tail}")


@pytest.fixture(scope="session")
def oracles():
    return ORACLES
