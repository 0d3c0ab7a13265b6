"""Shared fixtures and the per-criterion summary printed after the run."""

from __future__ import annotations

import pytest

from aidw import generate_random_points

_CRITERIA: dict[int, dict] = {}
_NOTES: dict[int, list[str]] = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(n, title): acceptance criterion checked by a test")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    mark = item.get_closest_marker("criterion")
    if mark is None:
        return
    n, title = mark.args
    entry = _CRITERIA.setdefault(n, {"title": title, "ok": True, "ran": False})
    if rep.when == "call" or rep.failed:
        entry["ran"] = True
        entry["ok"] = entry["ok"] and rep.passed


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    tr = terminalreporter
    tr.section("acceptance criteria")
    for n in sorted(_CRITERIA):
        e = _CRITERIA[n]
        status = "PASS" if e["ran"] and e["ok"] else ("FAIL" if e["ran"] else "SKIP")
        tr.write_line(f"criterion {n:>2}: {status}  {e['title']}")
        for line in _NOTES.get(n, []):
            tr.write_line(f"               {line}")


@pytest.fixture
def note():
    """``note(n, text)`` attaches a measured value to criterion ``n``'s summary line."""

    def add(n: int, text: str) -> None:
        _NOTES.setdefault(n, []).append(text)
        print(f"[criterion {n}] {text}")

    return add


@pytest.fixture(scope="session")
def small_data():
    return generate_random_points(500, seed=7, value_rule="planar")


@pytest.fixture(scope="session")
def small_queries():
    return generate_random_points(120, seed=8).as_queries()
