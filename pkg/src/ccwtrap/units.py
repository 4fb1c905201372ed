"""Strict parsing of physical quantities with explicit unit suffixes.

Every physical quantity on the command line is written as a number
immediately followed by a unit, e.g. ``100um``, ``13A`` or ``5K_per_W``.
Bare numbers and units of the wrong dimension are rejected.
"""

from __future__ import annotations

import re
from decimal import Decimal

# dimension -> {suffix: power of ten to SI}. Values are scaled in decimal
# arithmetic, so "0.1um" is exactly the float literal 0.1e-6.
UNITS: dict[str, dict[str, int]] = {
    "length": {"m": 0, "cm": -2, "mm": -3, "um": -6, "nm": -9},
    "current": {"A": 0, "mA": -3},
    "temperature": {"K": 0},
    "thermal_resistance": {"K_per_W": 0},
    "power": {"W": 0, "mW": -3},
    "resistance": {"Ohm": 0, "mOhm": -3, "uOhm": -6},
    "resistivity": {"Ohm_m": 0},
    "field": {"T": 0, "mT": -3, "uT": -6},
    "gradient": {"T_per_m": 0},
    "gradient_per_current": {"T_per_m_per_A": 0},
    "current_density": {"A_per_cm2": 0},
}

SI_NAME = {
    "length": "m",
    "current": "A",
    "temperature": "K",
    "thermal_resistance": "K_per_W",
    "power": "W",
    "resistance": "Ohm",
    "resistivity": "Ohm_m",
    "field": "T",
    "gradient": "T_per_m",
    "gradient_per_current": "T_per_m_per_A",
    "current_density": "A_per_cm2",
}

_QUANTITY = re.compile(
    r"^\s*(?P<num>[+-]?(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?|[+-]?inf(?=[A-Z]))(?P<unit>[A-Za-z_0-9]+)?\s*$"
)


class UnitError(ValueError):
    pass


def parse_quantity(text: str, dimension: str) -> float:
    """Value of ``text`` in SI units of ``dimension``.

    >>> parse_quantity("100um", "length")
    0.0001
    """
    table = UNITS[dimension]
    m = _QUANTITY.match(str(text))
    if not m:
        raise UnitError(f"cannot parse quantity {text!r}")
    unit = m.group("unit")
    if unit is None:
        raise UnitError(
            f"{text!r} has no unit; expected one of {', '.join(table)} ({dimension})"
        )
    if unit not in table:
        raise UnitError(f"unit {unit!r} in {text!r} is not a {dimension} unit ({', '.join(table)})")
    return float(Decimal(m.group("num")).scaleb(table[unit]))


def parse_list(text: str, dimension: str) -> list[float]:
    """Comma-separated quantities, e.g. ``80um,100um,120um``."""
    items = [s for s in str(text).split(",") if s.strip()]
    if not items:
        raise UnitError("empty list")
    return [parse_quantity(s, dimension) for s in items]


def describe(dimension: str) -> str:
    """Accepted suffixes, for help texts."""
    return "/".join(UNITS[dimension])
