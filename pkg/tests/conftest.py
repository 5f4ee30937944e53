from pathlib import Path

import pytest

DATA = Path(__file__).parent / "data"


@pytest.fixture
def small_csv():
    return DATA / "small.csv"


_CRITERIA: list[tuple[str, str, str]] = []


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(label): acceptance criterion reported in the summary")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    marker = item.get_closest_marker("criterion")
    if marker is None:
        return
    if report.when == "call" or (report.when == "setup" and report.outcome != "passed"):
        _CRITERIA.append((marker.args[0], "PASS" if report.passed else "FAIL", item.name))


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for label, status, name in sorted(_CRITERIA, key=lambda c: int(c[0].split()[0])):
        terminalreporter.write_line(f"[{status}] AC{label}  ({name})")
