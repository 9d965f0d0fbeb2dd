import pytest
from hypothesis import strategies as st

from taskcascade import toygen


@pytest.fixture
def fig3():
    return toygen.fig3()


@st.composite
def small_dags(draw, max_nodes=9, max_edges=None):
    n = draw(st.integers(1, max_nodes))
    return toygen.random_dag(
        n=n,
        edge_prob=draw(st.sampled_from([0.0, 0.2, 0.4, 0.7, 1.0])),
        horizon=draw(st.integers(12, 60)),
        max_duration=draw(st.integers(1, 10)),
        seed=draw(st.integers(0, 2**32 - 1)),
        max_edges=max_edges,
        project_slack=draw(st.integers(0, 15)),
    )


_criteria: dict = {}


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    report = (yield).get_result()
    mark = item.get_closest_marker("criterion")
    if mark is None or (report.when != "call" and report.passed):
        return
    number, title = mark.args
    ok = report.passed and _criteria.get(number, (True,))[0]
    _criteria[number] = (ok, title)


def pytest_terminal_summary(terminalreporter):
    if not _criteria:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_criteria):
        ok, title = _criteria[number]
        terminalreporter.write_line(f"{'PASS' if ok else 'FAIL'} criterion {number}: {title}")
