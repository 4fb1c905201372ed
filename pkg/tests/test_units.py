from __future__ import annotations

import math

import pytest

from ccwtrap.units import UNITS, UnitError, parse_list, parse_quantity


@pytest.mark.parametrize("text, dim, value", [
    ("100um", "length", 100e-6),
    ("88um", "length", 88e-6),
    ("15um", "length", 15e-6),
    ("4mm", "length", 4e-3),
    ("0.1um", "length", 0.1e-6),
    ("1.5e2um", "length", 150e-6),
    ("13A", "current", 13.0),
    ("500mA", "current", 0.5),
    ("40K", "temperature", 40.0),
    ("5K_per_W", "thermal_resistance", 5.0),
    ("1028mW", "power", 1.028),
    ("2mT", "field", 2e-3),
    ("150T_per_m", "gradient", 150.0),
    ("11.1T_per_m_per_A", "gradient_per_current", 11.1),
    ("1e6A_per_cm2", "current_density", 1e6),
    ("438mOhm", "resistance", 0.438),
    ("-3A", "current", -3.0),
    ("infW", "power", math.inf),
])
def test_parse(text, dim, value):
    assert parse_quantity(text, dim) == value


@pytest.mark.parametrize("text, dim", [("100", "length"), ("13", "current"), ("100 um", "length"),
                                       ("13A", "length"), ("5K/W", "thermal_resistance"),
                                       ("abc", "length"), ("", "length"), ("1e6", "current_density"),
                                       ("nanA", "current")])
def test_rejects(text, dim):
    with pytest.raises(UnitError):
        parse_quantity(text, dim)


def test_list():
    assert parse_list("80um,100um, 120um", "length") == [80e-6, 100e-6, 120e-6]
    with pytest.raises(UnitError):
        parse_list("80um,100", "length")
    with pytest.raises(UnitError):
        parse_list(",", "length")


def test_every_dimension_has_si_unit():
    for dim, table in UNITS.items():
        assert 0 in table.values(), dim
