import shutil
from pathlib import Path

import pytest

from specsym import lang

ROOT = Path(__file__).resolve().parents[1]
CORPUS = ROOT / "corpus"
CORPUS_NAMES = sorted(p.stem for p in CORPUS.glob("*.sx"))

_criteria = {}


def corpus_program(name):
    return lang.parse_file(CORPUS / f"{name}.sx")


@pytest.fixture(scope="session")
def corpus():
    return {name: corpus_program(name) for name in CORPUS_NAMES}


@pytest.fixture(scope="session")
def z3_path():
    path = shutil.which("z3")
    if path is None:
        pytest.skip("no z3 binary on PATH")
    return path


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(n, title): acceptance criterion number")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    marker = item.get_closest_marker("criterion")
    if marker is None:
        return
    n, title = marker.args
    if report.when == "call" or (report.when == "setup" and report.outcome != "passed"):
        _criteria[n] = (title, report.outcome)


def pytest_terminal_summary(terminalreporter):
    if not _criteria:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(_criteria):
        title, outcome = _criteria[n]
        verdict = {"passed": "PASS", "failed": "FAIL"}.get(outcome, outcome.upper())
        terminalreporter.write_line(f"criterion {n:>2}: {verdict}  {title}")
