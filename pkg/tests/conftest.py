import sys
from pathlib import Path

import pytest

HERE = Path(__file__).parent
FIXTURES = HERE / "fixtures"
sys.path.insert(0, str(HERE))
sys.path.insert(0, str(FIXTURES))

_acceptance = {}


@pytest.fixture
def fixture_images():
    return FIXTURES / "images"


def pytest_runtest_logreport(report):
    if "test_acceptance.py" not in report.nodeid:
        return
    if report.when == "call" or (report.when == "setup" and report.outcome != "passed"):
        props = dict(report.user_properties)
        name = report.nodeid.split("::")[-1]
        number = int(name.split("_")[2]) if name.startswith("test_criterion_") else name
        detail = props.get("detail", str(report.longrepr).splitlines()[-1] if report.failed else "")
        _acceptance[number] = ("PASS" if report.passed else "FAIL", detail)


def pytest_terminal_summary(terminalreporter):
    if not _acceptance:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_acceptance, key=lambda n: (isinstance(n, str), str(n).zfill(3))):
        status, detail = _acceptance[number]
        terminalreporter.write_line(f"criterion {number:>2}: {status}  {detail}")
