from __future__ import annotations

import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ccwtrap.geometry import (
    CrossSection,
    DegenerateSegmentError,
    LayoutSemanticError,
    LayoutSyntaxError,
    Point3,
    WireLayout,
    WirePath,
    antiparallel_pair,
    current_density,
    discretize,
    inside_conductor,
    load_layout,
    pair_centre_offset,
    parse_layout,
    routed_pair,
    routed_pair_length,
    serialize_layout,
    squares,
)

CS = CrossSection(100e-6, 15e-6)


def _doc(wires, unit="um", name="t"):
    return json.dumps({"name": name, "unit": unit, "wires": wires})


def _wire(verts, width=100, depth=15, current=1.0):
    return {"vertices": verts, "width": width, "depth": depth, "current_A": current}


# --- types ---------------------------------------------------------------------


def test_point3_rejects_non_finite():
    with pytest.raises(ValueError):
        Point3(0.0, math.nan, 0.0)
    with pytest.raises(ValueError):
        Point3(math.inf, 0.0, 0.0)


def test_cross_section_rejects_non_positive():
    with pytest.raises(ValueError):
        CrossSection(0.0, 1e-6)
    with pytest.raises(ValueError):
        CrossSection(1e-6, -1e-6)


def test_wire_path_invariants():
    with pytest.raises(ValueError):
        WirePath((Point3(0, 0, 0),), CS, 1.0)
    with pytest.raises(ValueError):
        WirePath((Point3(0, 0, 0), Point3(0, 0, 0)), CS, 1.0)


def test_layout_needs_wires():
    with pytest.raises(ValueError):
        WireLayout(())


# --- layout files ------------------------------------------------------------------


def test_parse_single_straight_wire():
    layout = parse_layout(_doc([_wire([[0, 0, 0], [1000, 0, 0]])]))
    assert len(layout.wires) == 1
    assert layout.wires[0].current == 1.0
    assert layout.wires[0].vertices[1].x == pytest.approx(1e-3)
    assert layout.wires[0].width == pytest.approx(100e-6)


def test_parse_empty_wire_list_is_semantic_error():
    with pytest.raises(LayoutSemanticError):
        parse_layout(_doc([]))


def test_parse_pair_file_has_opposite_currents(root):
    layout = load_layout(root / "layouts" / "reference_pair.json")
    assert len(layout.wires) == 2
    assert layout.wires[0].current == -layout.wires[1].current
    assert all(w.length == pytest.approx(4e-3) for w in layout.wires)


@pytest.mark.parametrize("text", ["{not json", "[]", json.dumps({"unit": "um"}),
                                  _doc([_wire([[0, 0, 0], [1, 0, 0]])], unit="inch"),
                                  _doc([{"vertices": [[0, 0, 0], [1, 0, 0]], "width": 1}])])
def test_parse_syntax_errors(text):
    with pytest.raises(LayoutSyntaxError):
        parse_layout(text)


@pytest.mark.parametrize("wire, index", [
    (_wire([[0, 0, 0], [1, 0, 0]], width=0), 1),
    (_wire([[0, 0, 0]]), 1),
    (_wire([[0, 0, 0], [0, 0, 0]]), 1),
])
def test_parse_semantic_errors_carry_wire_index(wire, index):
    ok = _wire([[0, 0, 0], [10, 0, 0]])
    with pytest.raises(LayoutSemanticError) as info:
        parse_layout(_doc([ok, wire]))
    assert info.value.wire_index == index
    assert "wire 1" in str(info.value)


def test_parse_units_scale_lengths():
    for unit, scale in (("m", 1.0), ("mm", 1e-3), ("um", 1e-6)):
        layout = parse_layout(_doc([_wire([[0, 0, 0], [2, 0, 0]], width=1, depth=1)], unit=unit))
        assert layout.wires[0].length == pytest.approx(2 * scale)


def test_round_trip_metres_is_exact(pair):
    routed = routed_pair(100e-6, 15e-6, 88e-6, 4e-3, 1.0, 210e-6, 1.8e-3)
    for layout in (pair, routed):
        assert parse_layout(serialize_layout(layout)) == layout


def test_round_trip_other_units_is_close(pair):
    back = parse_layout(serialize_layout(pair, "um"))
    for a, b in zip(back.wires, pair.wires):
        np.testing.assert_allclose(a.vertex_array(), b.vertex_array(), rtol=1e-12, atol=1e-18)
        assert a.current == b.current


def test_shipped_layouts_validate_against_schema(root):
    jsonschema = pytest.importorskip("jsonschema")
    schema = json.loads((root / "docs" / "layout_schema.json").read_text())
    for path in (root / "layouts").glob("*.json"):
        jsonschema.validate(json.loads(path.read_text()), schema)
        load_layout(path)


# --- builders ------------------------------------------------------------------------


def test_reference_pair_geometry(pair):
    a, b = pair.wires
    assert a.vertices[0].z == pytest.approx(94e-6)
    assert b.vertices[0].z == pytest.approx(-94e-6)
    assert a.vertices[0].y == pytest.approx(-7.5e-6)
    assert a.current == 1.0 and b.current == -1.0
    assert a.vertices[0].x == pytest.approx(-2e-3) and a.vertices[1].x == pytest.approx(2e-3)


def test_touching_wires_at_zero_separation():
    layout = antiparallel_pair(100e-6, 15e-6, 0.0, 4e-3, 1.0)
    assert layout.wires[0].vertices[0].z == pytest.approx(50e-6)


def test_pair_mirror_symmetry(pair):
    assert set(pair.mirrored_z().wires) == set(pair.wires)


def test_centre_convention():
    assert pair_centre_offset(100e-6, 188e-6, "centre") == pytest.approx(94e-6)
    assert pair_centre_offset(100e-6, 88e-6, "edge") == pytest.approx(94e-6)
    with pytest.raises(ValueError):
        pair_centre_offset(1e-6, 1e-6, "diagonal")


@pytest.mark.parametrize("bad", [dict(width=0), dict(depth=-1e-6), dict(length=0), dict(current=0),
                                 dict(separation=-1e-6)])
def test_pair_rejects_bad_arguments(bad):
    args = dict(width=100e-6, depth=15e-6, separation=88e-6, length=4e-3, current=1.0) | bad
    with pytest.raises(ValueError):
        antiparallel_pair(**args)


def test_routed_pair_structure():
    layout = routed_pair(100e-6, 15e-6, 88e-6, 4e-3, 1.0, 200e-6, 1.8e-3, n_returns=2)
    assert len(layout.wires) == 6
    # net current on each side is -1 A (one pair wire, two returns)
    plus_side = [w for w in layout.wires if w.vertices[1].z > 0]
    assert sum(w.current for w in plus_side) == pytest.approx(-1.0)
    assert set(layout.mirrored_z().wires) == set(layout.wires)
    total = sum(w.length for w in layout.wires)
    assert total == pytest.approx(routed_pair_length(100e-6, 88e-6, 4e-3, 200e-6, 1.8e-3), rel=1e-12)


def test_routed_pair_rejects_short_leads():
    with pytest.raises(ValueError):
        routed_pair(100e-6, 15e-6, 88e-6, 4e-3, 1.0, 200e-6, 100e-6)


# --- discretization ---------------------------------------------------------------------


def _straight(current=1.0):
    return WirePath((Point3(0, 0, 0), Point3(1e-3, 0, 0)), CS, current)


def test_identity_discretization():
    fils = discretize(_straight(), 1, 1)
    assert len(fils) == 1
    assert fils[0].start == Point3(0, 0, 0) and fils[0].end == Point3(1e-3, 0, 0)
    assert fils[0].current == 1.0


def test_two_lateral_filaments():
    fils = discretize(_straight(), 2, 1)
    offsets = sorted(abs(f.start.z) for f in fils)
    assert offsets == pytest.approx([25e-6, 25e-6])
    assert sorted(f.start.z for f in fils)[0] == pytest.approx(-25e-6)
    assert all(f.current == 0.5 for f in fils)
    assert all(f.start.y == 0 for f in fils)


@settings(max_examples=60, deadline=None)
@given(current=st.floats(-50, 50, allow_nan=False).filter(lambda c: c != 0),
       n_w=st.integers(1, 9), n_d=st.integers(1, 7))
def test_current_conservation_exact(current, n_w, n_d):
    path = WirePath((Point3(0, 0, 0), Point3(1e-3, 0, 0), Point3(1e-3, 0, 1e-3)), CS, current)
    fils = discretize(path, n_w, n_d)
    per_seg = n_w * n_d
    assert len(fils) == 2 * per_seg
    for s in range(2):
        total = 0.0
        for f in fils[s * per_seg:(s + 1) * per_seg]:
            total += f.current
        assert total == current


def test_mitered_corner_filaments_join():
    path = WirePath((Point3(0, 0, 0), Point3(1e-3, 0, 0), Point3(1e-3, 0, 1e-3)), CS, 1.0)
    fils = discretize(path, 4, 2)
    for a, b in zip(fils[:8], fils[8:]):
        assert a.end == b.start


def test_degenerate_segment_after_offset():
    # a 10 um segment between two 90 degree bends cannot host a 100 um wide mitered bundle
    path = WirePath((Point3(0, 0, 0), Point3(1e-3, 0, 0), Point3(1e-3, 0, 10e-6),
                     Point3(0, 0, 10e-6)), CS, 1.0)
    with pytest.raises(DegenerateSegmentError):
        discretize(path, 4, 1)


def test_discretize_rejects_zero_counts():
    with pytest.raises(ValueError):
        discretize(_straight(), 0, 1)


# --- squares and current density --------------------------------------------------------


def test_squares_390():
    path = WirePath((Point3(0, 0, 0), Point3(39e-3, 0, 0)), CS, 1.0)
    assert squares(path) == pytest.approx(390.0, rel=1e-12)


def test_unit_square():
    path = WirePath((Point3(0, 0, 0), Point3(100e-6, 0, 0)), CS, 1.0)
    assert squares(path) == 1.0


def test_squares_additive():
    path = WirePath((Point3(0, 0, 0), Point3(1e-3, 0, 0), Point3(1e-3, 2e-3, 0)), CS, 1.0)
    assert squares(path) == pytest.approx((1e-3 + 2e-3) / 100e-6, rel=1e-12)


@settings(max_examples=40, deadline=None)
@given(angle=st.floats(0, 2 * math.pi), shift=st.tuples(*[st.floats(-1e-2, 1e-2)] * 3))
def test_squares_rigid_invariance(angle, shift):
    verts = np.array([[0, 0, 0], [1e-3, 0, 0], [1e-3, 0, 2e-3], [3e-3, 0, 2.5e-3]])
    c, s = math.cos(angle), math.sin(angle)
    rot = np.array([[c, 0, -s], [0, 1, 0], [s, 0, c]])
    moved = verts @ rot.T + np.array(shift)
    a = WirePath(tuple(Point3.from_seq(v) for v in verts), CS, 1.0)
    b = WirePath(tuple(Point3.from_seq(v) for v in moved), CS, 1.0)
    assert squares(b) == pytest.approx(squares(a), rel=1e-12)


def test_current_density_values():
    path = _straight()
    assert current_density(path, 15.0) == 1.0e6
    assert current_density(path, 0.0) == 0.0
    assert current_density(path, 1.0) == pytest.approx(6.6667e4, rel=1e-4)
    assert current_density(path, -15.0) == 1.0e6


def test_inside_conductor(pair):
    pts = np.array([[0, -7.5e-6, 94e-6], [0, 125e-6, 0], [0, -7.5e-6, -94e-6], [3e-3, -7.5e-6, 94e-6]])
    assert inside_conductor(pair, pts).tolist() == [0, -1, 1, -1]


@pytest.mark.parametrize("verts", [(Point3(0, 0, 0), Point3(0, 0, 0)), (Point3(0, 0, 0),)])
def test_zero_length_path_is_rejected(verts):
    with pytest.raises(ValueError):
        WirePath(verts, CS, 1.0)
