import pytest

from habopt.grid import build_grid
from habopt.resource import ConstraintSet

_criteria = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(number, title): acceptance criterion")


@pytest.fixture
def c04():
    return ConstraintSet(1.0, 0.4)


@pytest.fixture
def g64():
    return build_grid(1, [64])


@pytest.fixture
def g128():
    return build_grid(1, [128])


@pytest.fixture
def g256():
    return build_grid(1, [256])


def pytest_runtest_logreport(report):
    if report.when != "call" and not (report.when == "setup" and report.outcome != "passed"):
        return
    mark = _criteria.get(report.nodeid)
    if mark is not None:
        _criteria[report.nodeid] = (mark[0], mark[1], report.outcome)


def pytest_collection_modifyitems(items):
    for item in items:
        m = item.get_closest_marker("criterion")
        if m is not None:
            _criteria[item.nodeid] = (str(m.args[0]), m.args[1], "not run")


def pytest_terminal_summary(terminalreporter):
    if not _criteria:
        return
    terminalreporter.section("acceptance criteria")
    for number, title, outcome in sorted(_criteria.values(), key=lambda t: (len(t[0]), t[0])):
        verdict = {"passed": "PASS", "failed": "FAIL"}.get(outcome, outcome.upper())
        terminalreporter.write_line(f"[{verdict}] {number}. {title}")
