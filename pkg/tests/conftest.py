import time

import pytest

_VERDICTS = []


class Criterion:
    """Records one acceptance verdict; the summary prints them all at the end."""

    def __init__(self, label):
        self.label = label
        self.notes = []

    def note(self, text):
        self.notes.append(text)


@pytest.fixture
def criterion(request):
    marker = request.node.get_closest_marker("criterion")
    c = Criterion(marker.args[0] if marker else request.node.name)
    start = time.perf_counter()
    yield c
    rep = getattr(request.node, "rep_call", None)
    ok = rep is not None and rep.passed
    elapsed = time.perf_counter() - start
    detail = "; ".join(c.notes)
    line = f"{'PASS' if ok else 'FAIL'}  {c.label}  ({elapsed:.1f}s){'  ' + detail if detail else ''}"
    _VERDICTS.append(line)
    print(line)


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    if rep.when == "call":
        item.rep_call = rep


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(label): acceptance criterion label")


def pytest_terminal_summary(terminalreporter):
    if _VERDICTS:
        terminalreporter.section("acceptance criteria")
        for line in _VERDICTS:
            terminalreporter.write_line(line)
