import pytest
from hypothesis import HealthCheck, settings

from shellsynth.executor import SimulatedBackend
from shellsynth.grammar import load_bundled_grammar

settings.register_profile(
    "default", deadline=None, max_examples=100, suppress_health_check=[HealthCheck.too_slow]
)
settings.load_profile("default")


@pytest.fixture(scope="session")
def toy():
    return load_bundled_grammar()


@pytest.fixture
def sim():
    return SimulatedBackend()


_CRITERIA = {}


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    mark = item.get_closest_marker("criterion")
    if mark is None or report.when != "call":
        return
    number, title = mark.args
    detail = "; ".join(f"{k}={v}" for k, v in item.user_properties)
    _CRITERIA[number] = ("PASS" if report.passed else "FAIL", title, detail)


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_CRITERIA):
        status, title, detail = _CRITERIA[number]
        line = f"AC{number} {status}: {title}"
        terminalreporter.write_line(line + (f" ({detail})" if detail else ""))
