import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from wgmpair.materials import Polarization, mgo_linbo3  # noqa: E402
from wgmpair.modes import ResonatorGeometry, mode_near_wavelength  # noqa: E402

E, O = Polarization.EXTRAORDINARY, Polarization.ORDINARY


@pytest.fixture(scope="session")
def material():
    return mgo_linbo3()


@pytest.fixture(scope="session")
def geometry():
    return ResonatorGeometry(1.61e-3, 0.4e-3)


@pytest.fixture(scope="session")
def pump(geometry, material):
    return mode_near_wavelength(geometry, material, 1, 0, E, 532e-9, 40.0)


_CRITERIA = {}


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    mark = item.get_closest_marker("criterion")
    if mark is None or report.when != "call":
        return
    number, title = mark.args
    _CRITERIA[number] = (title, report.passed, report.duration)


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_CRITERIA):
        title, ok, secs = _CRITERIA[number]
        terminalreporter.write_line(
            f"criterion {number:2d}: {'PASS' if ok else 'FAIL'}  {title}  ({secs:.1f} s)")
