from collections import OrderedDict

import pytest

# criterion number -> [title, passed so far, number of tests]
_CRITERIA: "OrderedDict[int, list]" = OrderedDict()


def pytest_runtest_logreport(report):
    if report.when != "call" and not (report.failed or report.skipped):
        return
    marker = getattr(report, "criterion", None)
    if marker is None:
        return
    number, title = marker
    entry = _CRITERIA.setdefault(number, [title, True, 0])
    if report.when == "call":
        entry[2] += 1
    if report.failed or report.skipped:
        entry[1] = False


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    # attach the marker to the report so the log hook can see it
    outcome = yield
    m = item.get_closest_marker("criterion")
    if m is not None:
        outcome.get_result().criterion = (m.args[0], m.args[1])


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_CRITERIA):
        title, ok, n = _CRITERIA[number]
        terminalreporter.write_line(f"criterion {number:>2}: {'PASS' if ok and n else 'FAIL'}  {title} ({n} tests)")
