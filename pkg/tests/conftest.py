import pytest

_RESULTS = {}


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    mark = item.get_closest_marker("criterion")
    if mark is None:
        return
    if rep.when == "call" or (rep.when == "setup" and not rep.passed):
        detail = "; ".join(f"{k}={v}" for k, v in item.user_properties)
        name = mark.args[0]
        callspec = getattr(item, "callspec", None)
        if callspec is not None:
            name += f" ({callspec.id})"
        _RESULTS[item.nodeid] = (name, rep.passed, detail)


def pytest_terminal_summary(terminalreporter):
    if not _RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for name, ok, detail in _RESULTS.values():
        line = f"{'PASS' if ok else 'FAIL'}  {name}"
        if detail:
            line += f"  [{detail}]"
        terminalreporter.write_line(line)
