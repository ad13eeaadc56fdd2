import numpy as np
import pytest

from jumpfinder.estimators import ObservedSample


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def step_sample(n=200, s=0.5, d=1.0):
    """Noiseless step on an equispaced design i/n."""
    w = np.arange(1, n + 1) / n
    return ObservedSample(w, np.where(w < s, 0.0, d))


@pytest.fixture
def step():
    return step_sample()


# ---------------------------------------------------------------- acceptance report

_CRITERIA: dict[int, dict] = {}


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    mark = item.get_closest_marker("criterion")
    if mark is None:
        return
    number, title = mark.args
    entry = _CRITERIA.setdefault(number, {"title": title, "passed": 0, "failed": [], "details": []})
    if rep.when == "call" or (rep.when == "setup" and not rep.passed):
        if rep.passed:
            entry["passed"] += 1
        else:
            entry["failed"].append(item.name)
        entry["details"].extend(v for k, v in item.user_properties if k == "detail")


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    tr = terminalreporter
    tr.section("acceptance criteria")
    for number in sorted(_CRITERIA):
        e = _CRITERIA[number]
        total = e["passed"] + len(e["failed"])
        status = "PASS" if not e["failed"] else "FAIL"
        tr.write_line(f"criterion {number} {status}: {e['title']} ({e['passed']}/{total} checks)")
        for d in e["details"]:
            tr.write_line(f"    {d}")
        for name in e["failed"]:
            tr.write_line(f"    failed: {name}")
