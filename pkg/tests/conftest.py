import numpy as np
import pytest

from stablerec.fixtures import four_group_example, nonsharp_stable_example, strong_unstable_example


@pytest.fixture
def nonsharp_stable():
    return nonsharp_stable_example()


@pytest.fixture
def strong_unstable():
    return strong_unstable_example()


@pytest.fixture
def four_group_stable():
    return four_group_example(b=(1.0, 0.0, -1.0, 0.0, 1.0))


@pytest.fixture
def four_group_sharp():
    return four_group_example(b=(1.0, 0.0, 1.0, 0.0, 1.0))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


# --------------------------------------------------------------------------
# acceptance summary: one pass/fail line per criterion, printed after the run

_CRITERIA = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(n, title): acceptance criterion number")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    mark = item.get_closest_marker("criterion")
    if mark is None or rep.when not in ("setup", "call"):
        return
    n, title = mark.args
    if rep.when == "setup" and rep.passed:
        return
    detail = dict(item.user_properties).get("detail", "")
    if rep.failed and not detail:
        detail = rep.longreprtext.strip().splitlines()[-1][:160] if rep.longreprtext else ""
    _CRITERIA[n] = (title, rep.passed, detail)


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(_CRITERIA):
        title, ok, detail = _CRITERIA[n]
        terminalreporter.write_line(f"criterion {n:2d} {'PASS' if ok else 'FAIL'}  {title}"
                                    + (f"  [{detail}]" if detail else ""))
