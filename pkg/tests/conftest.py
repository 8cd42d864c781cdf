import pytest

_RESULTS: dict = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(n): acceptance criterion the test belongs to")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    marker = item.get_closest_marker("criterion")
    if marker is None:
        return
    if rep.when == "call" or (rep.when == "setup" and not rep.passed):
        ok = rep.passed and not hasattr(rep, "wasxfail")
        detail = dict(item.user_properties).get("detail", "")
        _RESULTS.setdefault(marker.args[0], []).append((item.originalname or item.name, ok, detail))


def pytest_terminal_summary(terminalreporter):
    if not _RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(_RESULTS):
        checks = _RESULTS[n]
        ok = all(c[1] for c in checks)
        parts = [f"{name}={'ok' if good else 'FAILED'}" + (f" [{d}]" if d else "") for name, good, d in checks]
        terminalreporter.write_line(f"criterion {n}: {'PASS' if ok else 'FAIL'} | " + "; ".join(parts))
