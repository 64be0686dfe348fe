import pytest

_RESULTS = []


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    marker = item.get_closest_marker("acceptance")
    if marker is None or not (report.when == "call" or report.failed):
        return
    number, title = marker.args
    detail = "; ".join(f"{k}={v}" for k, v in item.user_properties)
    status = "PASS" if report.passed else "FAIL"
    line = f"criterion {number:>2} {status}  {title}" + (f"  [{detail}]" if detail else "")
    _RESULTS.append((number, item.name, line))


def pytest_terminal_summary(terminalreporter):
    if not _RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for _, _, line in sorted(_RESULTS, key=lambda r: (r[0], r[1])):
        terminalreporter.write_line(line)
