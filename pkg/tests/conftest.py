from __future__ import annotations

from pathlib import Path

import pytest

from safeval.backends import Backends, FixtureBackend
from safeval.data import explain_example_path, explain_example_texts

DATA = Path(__file__).parent / "data"
GOLDEN_FIXTURE = DATA / "golden_fixture.jsonl"
GOLDEN_CORPUS = DATA / "golden_corpus.jsonl"
GOLDEN_REPORT = DATA / "golden_report.json"


def fixture_backends(fb: FixtureBackend) -> Backends:
    return Backends(qa=fb, qg=fb, annotator=fb, weighter=fb)


@pytest.fixture
def explain_case():
    fb = FixtureBackend.from_file(explain_example_path())
    return fixture_backends(fb), explain_example_texts()


@pytest.fixture
def golden_backend():
    return FixtureBackend.from_file(GOLDEN_FIXTURE)


_criteria: dict[int, tuple[str, list[bool]]] = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(number, title): acceptance criterion covered by the test")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    marker = item.get_closest_marker("criterion")
    if marker is None or report.when != "call" and not (report.when == "setup" and report.failed):
        return
    number, title = marker.args
    _criteria.setdefault(number, (title, []))[1].append(report.passed)


def pytest_terminal_summary(terminalreporter):
    if not _criteria:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_criteria):
        title, results = _criteria[number]
        status = "PASS" if results and all(results) else "FAIL"
        terminalreporter.write_line(f"criterion {number:2d} {status}: {title}")
