"""Per-criterion summary for the acceptance suite.

Tests marked ``@pytest.mark.acceptance(n, "title")`` are grouped by ``n``;
a criterion passes only if every test in its group passes.
"""

from collections import OrderedDict

_results: "OrderedDict[int, dict]" = OrderedDict()


def pytest_collection_modifyitems(items):
    for item in items:
        m = item.get_closest_marker("acceptance")
        if m is not None:
            n, title = m.args
            _results.setdefault(n, {"title": title, "outcomes": {}})


def pytest_runtest_logreport(report):
    if report.when != "call" and not (report.when == "setup" and report.outcome != "passed"):
        return
    for n, entry in _results.items():
        if f"criterion_{n}_" in report.nodeid or report.nodeid.endswith(f"criterion_{n}"):
            entry["outcomes"][report.nodeid] = report.outcome


def pytest_terminal_summary(terminalreporter):
    ran = {n: e for n, e in _results.items() if e["outcomes"]}
    if not ran:
        return
    terminalreporter.section("acceptance criteria")
    for n, e in sorted(ran.items()):
        outcomes = e["outcomes"].values()
        ok = all(o == "passed" for o in outcomes)
        detail = f"{sum(o == 'passed' for o in outcomes)}/{len(e['outcomes'])} checks"
        terminalreporter.write_line(f"criterion {n}: {'PASS' if ok else 'FAIL'}  {e['title']}  ({detail})")
