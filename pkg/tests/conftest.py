import sys
from importlib import resources
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from peepre.dsl import load  # noqa: E402

SUITE = resources.files("peepre") / "suite"

MUL_UDIV = """\
Name: mul_nuw_udiv
%m = mul nuw %X, C1
%r = udiv %m, C2
=>
%r = udiv %X, C2 /u C1
"""

_criteria = {}        # nodeid -> criterion label
_outcomes = {}        # label -> list of outcomes
_measurements = []    # free-form lines reported after the run


def suite_files():
    return sorted(p for p in SUITE.iterdir() if p.name.endswith(".opt"))


def concrete_files():
    return sorted(p for p in (SUITE / "concrete").iterdir() if p.name.endswith(".opt"))


@pytest.fixture
def mul_udiv():
    return load(MUL_UDIV)


@pytest.fixture
def measure():
    """Record a measured value that is reported, not asserted."""
    return _measurements.append


def pytest_configure(config):
    config.addinivalue_line("markers", "acceptance(label): acceptance criterion reported in the summary")
    config.addinivalue_line("markers", "slow: long-running end-to-end test")


def pytest_collection_finish(session):
    for item in session.items:
        m = item.get_closest_marker("acceptance")
        if m is not None:
            _criteria[item.nodeid] = m.args[0]


def pytest_runtest_logreport(report):
    label = _criteria.get(report.nodeid)
    if label is None:
        return
    if report.when == "call" or report.outcome != "passed":
        _outcomes.setdefault(label, []).append(report.outcome)


def pytest_terminal_summary(terminalreporter):
    if _measurements:
        terminalreporter.section("measurements")
        for line in _measurements:
            terminalreporter.write_line(line)
    if not _criteria:
        return
    terminalreporter.section("acceptance criteria")
    for label in dict.fromkeys(_criteria.values()):
        res = _outcomes.get(label, ["not run"])
        if all(r == "skipped" for r in res):
            verdict = "SKIP"
        elif all(r in ("passed", "skipped") for r in res):
            verdict = "PASS"
        else:
            verdict = "FAIL"
        terminalreporter.write_line(f"{verdict}  {label}")
