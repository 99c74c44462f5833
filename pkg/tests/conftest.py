from pathlib import Path

import pytest

from hwmi.pipeline import load_file

MODELS = Path(__file__).resolve().parents[1] / "src" / "hwmi" / "models"
BENCH = MODELS / "bench"
GOLDEN = Path(__file__).resolve().parent / "golden"


@pytest.fixture
def broken():
    return load_file(MODELS / "broken.hwmi")


@pytest.fixture
def machine():
    return load_file(MODELS / "machine.halpl")


_ACCEPTANCE: dict[str, str] = {}


def pytest_runtest_logreport(report):
    if "test_acceptance.py" not in report.nodeid:
        return
    name = report.nodeid.split("::")[-1]
    if report.when == "call" or report.failed:
        _ACCEPTANCE.setdefault(name, "PASS" if report.passed else "FAIL")
        if report.failed:
            _ACCEPTANCE[name] = "FAIL"


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance")
    for name, status in sorted(_ACCEPTANCE.items()):
        terminalreporter.write_line(f"{name}: {status}")
