import shutil
from pathlib import Path

import pytest

from purposekg.ingest import parse_purpose

FIXTURES = Path(__file__).parent / "fixtures"
EHR = FIXTURES / "ehr"

_criteria: dict[int, list[bool]] = {}


@pytest.fixture
def ehr_dir() -> Path:
    return EHR


@pytest.fixture
def ehr_purpose():
    return parse_purpose(EHR / "purpose.yaml")


@pytest.fixture
def ehr_copy(tmp_path) -> Path:
    """A writable copy of the fixture directory."""
    target = tmp_path / "ehr"
    shutil.copytree(EHR, target)
    return target


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    marker = item.get_closest_marker("criterion")
    if marker is None:
        return
    if report.when == "call" or (report.when == "setup" and not report.passed):
        _criteria.setdefault(marker.args[0], []).append(report.passed)


def pytest_terminal_summary(terminalreporter):
    if not _criteria:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_criteria):
        results = _criteria[number]
        verdict = "PASS" if all(results) else "FAIL"
        terminalreporter.write_line(f"criterion {number}: {verdict} ({sum(results)}/{len(results)} checks)")
