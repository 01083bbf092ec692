import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).parent))

import pytest

_CRITERIA: dict[int, dict] = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(n, title): acceptance criterion n")


@pytest.fixture
def record(request):
    """Attach a measured-value summary to the acceptance line of the running test."""
    marker = request.node.get_closest_marker("criterion")
    entry = _CRITERIA.setdefault(marker.args[0], {"title": marker.args[1], "detail": "", "outcome": None})

    def note(text: str) -> None:
        entry["detail"] = text
    return note


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    marker = item.get_closest_marker("criterion")
    if marker is None or rep.when != "call" and not rep.failed:
        return
    entry = _CRITERIA.setdefault(marker.args[0], {"title": marker.args[1], "detail": "", "outcome": None})
    if rep.failed or entry["outcome"] is None or rep.when == "call":
        entry["outcome"] = "FAIL" if rep.failed else "PASS" if rep.passed else "SKIP"
        if rep.failed and not entry["detail"]:
            entry["detail"] = str(rep.longrepr).strip().splitlines()[-1][:160]


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(_CRITERIA):
        e = _CRITERIA[n]
        detail = f" ({e['detail']})" if e["detail"] else ""
        terminalreporter.write_line(f"criterion {n:2d} {e['outcome'] or 'NOT RUN'}: {e['title']}{detail}")
