"""Collects acceptance-criterion outcomes and prints one line per criterion."""

import pytest

_RESULTS: dict[int, tuple[str, str, float]] = {}


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    mark = item.get_closest_marker("criterion")
    if mark is None or rep.when != "call" and not rep.failed:
        return
    number, title = mark.args
    prev = _RESULTS.get(number)
    ok = rep.passed and (prev is None or prev[0] == "PASS")
    _RESULTS[number] = ("PASS" if ok else "FAIL", title,
                        (prev[2] if prev else 0.0) + rep.duration)


def pytest_terminal_summary(terminalreporter):
    if not _RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(_RESULTS):
        status, title, secs = _RESULTS[n]
        terminalreporter.write_line(f"criterion {n}: {status}  {title}  ({secs:.2f}s)")
