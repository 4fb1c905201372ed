"""Regenerate the layout files shipped in src/ccwtrap/data and layouts/."""

from __future__ import annotations

import shutil
from pathlib import Path

from ccwtrap.design import reconstruct_lead_length, reconstructed_layout, REFERENCE_LEAD_LENGTH
from ccwtrap.geometry import (
    CrossSection,
    Point3,
    WireLayout,
    WirePath,
    antiparallel_pair,
    serialize_layout,
)

ROOT = Path(__file__).resolve().parents[1]
DATA = ROOT / "src" / "ccwtrap" / "data"
LAYOUTS = ROOT / "layouts"


def main():
    lead = reconstruct_lead_length()
    print(f"lead length for 390 squares: {lead:.6e} m (stored constant {REFERENCE_LEAD_LENGTH:.6e} m)")
    routed = reconstructed_layout(1.0)
    pair = antiparallel_pair(100e-6, 15e-6, 88e-6, 4e-3, 1.0)
    pair = WireLayout(pair.wires, "antiparallel pair, 100 x 15 um, 88 um gap, 4 mm")
    strip = WireLayout(
        (WirePath((Point3(0.0, -7.5e-6, 0.0), Point3(39e-3, -7.5e-6, 0.0)),
                  CrossSection(100e-6, 15e-6), 1.0),),
        "straight 390-square strip, 100 x 15 um",
    )
    docs = {
        "routed_gate_zone": serialize_layout(routed, "m"),
        "reference_pair": serialize_layout(pair, "um"),
        "strip_390sq": serialize_layout(strip, "um"),
    }
    for name, text in docs.items():
        (DATA / f"{name}.json").write_text(text, encoding="utf-8")
        shutil.copy(DATA / f"{name}.json", LAYOUTS / f"{name}.json")
        print("wrote", name)


if __name__ == "__main__":
    main()
