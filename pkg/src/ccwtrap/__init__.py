"""Design and analysis toolkit for current-carrying wires beneath surface ion traps."""

from __future__ import annotations

__version__ = "0.1.0"
