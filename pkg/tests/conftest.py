import pytest

_RESULTS = {}


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    marker = item.get_closest_marker("criterion")
    if marker is None:
        return
    number, title = marker.args
    failed = rep.failed
    if rep.when == "call" or failed:
        measured = [f"{k}={v}" for k, v in item.user_properties]
        _, status, seen = _RESULTS.get(number, (title, "PASS", []))
        if failed:
            status = "FAIL"
        _RESULTS[number] = (title, status, seen + measured)


def pytest_terminal_summary(terminalreporter):
    if not _RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_RESULTS):
        title, status, measured = _RESULTS[number]
        terminalreporter.write_line(f"criterion {number:>2} {status}  {title}")
        for m in measured:
            terminalreporter.write_line(f"              {m}")
