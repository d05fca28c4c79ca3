import os
import sys

import pytest

sys.path.insert(0, os.path.dirname(__file__))

_ACCEPTANCE = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "acceptance(number, title): numbered acceptance criterion")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    mark = item.get_closest_marker("acceptance")
    if mark is None:
        return
    num, title = mark.args
    prev = _ACCEPTANCE.get(num, (title, "PASS"))
    if rep.failed:
        _ACCEPTANCE[num] = (title, "FAIL")
    elif rep.when == "call" and rep.passed:
        _ACCEPTANCE[num] = prev
    elif rep.skipped:
        _ACCEPTANCE[num] = (title, "SKIP")


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for num in sorted(_ACCEPTANCE):
        title, status = _ACCEPTANCE[num]
        terminalreporter.write_line(f"[{status}] {num:2d}. {title}")


@pytest.fixture(scope="session")
def twist_run_T20():
    """smooth_twist(0.3), N = 200, run to T = 20 with reports every 0.5."""
    import time

    from cpnflow.flow import FlowConfig, run

    cfg = FlowConfig(N=200, cfl=0.1, T_final=20.0, profile="smooth_twist", amplitude=0.3, report_every=0.5)
    start = time.perf_counter()
    res = run(cfg)
    return res, time.perf_counter() - start
