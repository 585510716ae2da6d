"""Collects acceptance-tagged test outcomes into a one-line-per-criterion report."""

import re

import pytest

_DESCRIPTIONS: dict[str, str] = {}
_OUTCOMES: dict[str, list[bool]] = {}


def pytest_configure(config):
    config.addinivalue_line(
        "markers",
        "acceptance(cid, description): tie a test to one acceptance criterion",
    )


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    mark = item.get_closest_marker("acceptance")
    if mark is None:
        return
    cid, description = mark.args
    _DESCRIPTIONS[cid] = description
    # Setup/teardown only matter when they break; the call phase is the verdict.
    if report.when == "call" or report.outcome != "passed":
        _OUTCOMES.setdefault(cid, []).append(report.outcome == "passed")


def _criterion_order(cid: str):
    m = re.match(r"(\d+)(.*)", cid)
    return (int(m.group(1)), m.group(2)) if m else (999, cid)


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    # Another suite's conftest may have printed some criteria already when
    # several suites run in one session; each criterion appears once.
    printed = getattr(config, "_acceptance_printed", None)
    if printed is None:
        printed = set()
        config._acceptance_printed = printed
    pending = [cid for cid in _DESCRIPTIONS if cid not in printed]
    if not pending:
        return
    terminalreporter.section("acceptance summary")
    for cid in sorted(pending, key=_criterion_order):
        printed.add(cid)
        outcomes = _OUTCOMES.get(cid, [])
        ok = bool(outcomes) and all(outcomes)
        verdict = "PASS" if ok else "FAIL"
        terminalreporter.write_line(
            f"C{cid:<4} {verdict}  {_DESCRIPTIONS[cid]}", green=ok, red=not ok
        )
