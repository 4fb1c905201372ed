from __future__ import annotations

from pathlib import Path

import pytest

from ccwtrap.geometry import CrossSection, Point3, WireLayout, WirePath, antiparallel_pair

ROOT = Path(__file__).resolve().parents[1]


@pytest.fixture(scope="session")
def root() -> Path:
    return ROOT


@pytest.fixture(scope="session")
def pair() -> WireLayout:
    """100 x 15 um wires, 88 um edge gap, 4 mm long, +-1 A."""
    return antiparallel_pair(100e-6, 15e-6, 88e-6, 4e-3, 1.0)


@pytest.fixture(scope="session")
def strip_390() -> WireLayout:
    """Straight 39 mm x 100 um x 15 um strip: 390 squares."""
    path = WirePath((Point3(0, -7.5e-6, 0), Point3(39e-3, -7.5e-6, 0)), CrossSection(100e-6, 15e-6), 1.0)
    return WireLayout((path,), "strip")


def pytest_terminal_summary(terminalreporter):
    try:
        from test_acceptance import RESULTS
    except ImportError:
        return
    if RESULTS:
        terminalreporter.section("acceptance criteria")
        for line in RESULTS:
            terminalreporter.write_line(line)
