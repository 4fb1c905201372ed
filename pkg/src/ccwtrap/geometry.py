"""Wire layouts with rectangular cross-sections and their filament discretization.

Coordinates follow the trap convention: ``y`` is height above the trap
surface, ``z`` is the axial trap direction and ``x`` is transverse. All
lengths are stored in metres.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

UNIT_SCALE = {"m": 1.0, "mm": 1e3, "um": 1e6}

DEFAULT_N_W = 4
DEFAULT_N_D = 2


class LayoutError(ValueError):
    """Base class for problems with a layout document."""


class LayoutSyntaxError(LayoutError):
    """The layout document is not well-formed."""


class LayoutSemanticError(LayoutError):
    """The layout document is well-formed but violates a layout invariant."""

    def __init__(self, message: str, wire_index: int | None = None):
        if wire_index is not None:
            message = f"wire {wire_index}: {message}"
        super().__init__(message)
        self.wire_index = wire_index


class DegenerateSegmentError(ValueError):
    """A segment cannot be given a well-defined cross-section frame."""


@dataclass(frozen=True)
class Point3:
    x: float
    y: float
    z: float

    def __post_init__(self):
        for name in ("x", "y", "z"):
            value = float(getattr(self, name))
            if not math.isfinite(value):
                raise ValueError(f"Point3.{name} must be finite, got {value}")
            object.__setattr__(self, name, value)

    def __iter__(self):
        yield self.x
        yield self.y
        yield self.z

    def as_array(self) -> np.ndarray:
        return np.array([self.x, self.y, self.z])

    @classmethod
    def from_seq(cls, seq: Sequence[float]) -> "Point3":
        x, y, z = seq
        return cls(x, y, z)

    def translated(self, offset: Sequence[float]) -> "Point3":
        dx, dy, dz = offset
        return Point3(self.x + dx, self.y + dy, self.z + dz)


@dataclass(frozen=True)
class CrossSection:
    """Rectangular conductor cross-section: lateral ``width`` and vertical ``depth`` [m]."""

    width: float
    depth: float

    def __post_init__(self):
        if not (self.width > 0 and self.depth > 0):
            raise ValueError(
                f"cross-section needs width > 0 and depth > 0, got {self.width}, {self.depth}"
            )

    @property
    def area(self) -> float:
        return self.width * self.depth


@dataclass(frozen=True)
class Filament:
    """Zero-thickness straight current segment."""

    start: Point3
    end: Point3
    current: float

    def __post_init__(self):
        if self.start == self.end:
            raise ValueError("filament start and end coincide")


@dataclass(frozen=True)
class WirePath:
    """Centerline polyline of a conductor.

    Positive ``current`` flows from the first vertex toward the last.
    """

    vertices: tuple[Point3, ...]
    cross_section: CrossSection
    current: float

    def __post_init__(self):
        verts = tuple(v if isinstance(v, Point3) else Point3.from_seq(v) for v in self.vertices)
        object.__setattr__(self, "vertices", verts)
        object.__setattr__(self, "current", float(self.current))
        if len(verts) < 2:
            raise ValueError("a wire path needs at least 2 vertices")
        for a, b in zip(verts[:-1], verts[1:]):
            if a == b:
                raise ValueError(f"consecutive vertices coincide at {a}")
        if not math.isfinite(self.current):
            raise ValueError("wire current must be finite")

    @property
    def width(self) -> float:
        return self.cross_section.width

    @property
    def depth(self) -> float:
        return self.cross_section.depth

    def vertex_array(self) -> np.ndarray:
        return np.array([v.as_array() for v in self.vertices])

    def segment_lengths(self) -> np.ndarray:
        return np.linalg.norm(np.diff(self.vertex_array(), axis=0), axis=1)

    @property
    def length(self) -> float:
        return float(np.sum(self.segment_lengths()))

    def with_current(self, current: float) -> "WirePath":
        return WirePath(self.vertices, self.cross_section, current)

    def translated(self, offset: Sequence[float]) -> "WirePath":
        return WirePath(
            tuple(v.translated(offset) for v in self.vertices), self.cross_section, self.current
        )


@dataclass(frozen=True)
class WireLayout:
    wires: tuple[WirePath, ...]
    name: str = ""

    def __post_init__(self):
        object.__setattr__(self, "wires", tuple(self.wires))
        if not self.wires:
            raise ValueError("a layout needs at least one wire")

    @property
    def drive_current(self) -> float:
        """Largest absolute wire current; per-ampere figures are normalised by it."""
        return max(abs(w.current) for w in self.wires)

    def scaled(self, k: float) -> "WireLayout":
        return WireLayout(tuple(w.with_current(k * w.current) for w in self.wires), self.name)

    def translated(self, offset: Sequence[float]) -> "WireLayout":
        return WireLayout(tuple(w.translated(offset) for w in self.wires), self.name)

    def mirrored_z(self) -> "WireLayout":
        """Reflect through the z = 0 plane and reverse every current."""
        wires = []
        for w in self.wires:
            verts = tuple(Point3(v.x, v.y, -v.z) for v in w.vertices)
            wires.append(WirePath(verts, w.cross_section, -w.current))
        return WireLayout(tuple(wires), self.name)


# --- layout documents -------------------------------------------------------


def parse_layout(text: str) -> WireLayout:
    """Parse a JSON layout document into a :class:`WireLayout` (SI units)."""
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise LayoutSyntaxError(f"malformed layout document: {exc}") from exc
    if not isinstance(doc, dict):
        raise LayoutSyntaxError("layout document must be a JSON object")
    for key in ("unit", "wires"):
        if key not in doc:
            raise LayoutSyntaxError(f"missing field '{key}'")
    unit = doc["unit"]
    if unit not in UNIT_SCALE:
        raise LayoutSyntaxError(f"unit must be one of {sorted(UNIT_SCALE)}, got {unit!r}")
    scale = UNIT_SCALE[unit]
    name = doc.get("name", "")
    if not isinstance(name, str):
        raise LayoutSyntaxError("'name' must be a string")
    raw_wires = doc["wires"]
    if not isinstance(raw_wires, list):
        raise LayoutSyntaxError("'wires' must be a list")
    if not raw_wires:
        raise LayoutSemanticError("layout has an empty wire list")

    wires = []
    for i, raw in enumerate(raw_wires):
        if not isinstance(raw, dict):
            raise LayoutSyntaxError(f"wire {i}: entry must be an object")
        for key in ("vertices", "width", "depth", "current_A"):
            if key not in raw:
                raise LayoutSyntaxError(f"wire {i}: missing field '{key}'")
        verts = raw["vertices"]
        if not isinstance(verts, list) or not all(
            isinstance(v, list) and len(v) == 3 and all(_is_number(c) for c in v) for v in verts
        ):
            raise LayoutSyntaxError(f"wire {i}: 'vertices' must be a list of [x, y, z] numbers")
        for key in ("width", "depth", "current_A"):
            if not _is_number(raw[key]):
                raise LayoutSyntaxError(f"wire {i}: '{key}' must be a number")
        if len(verts) < 2:
            raise LayoutSemanticError("fewer than 2 vertices", i)
        width, depth = raw["width"] / scale, raw["depth"] / scale
        if not (width > 0 and depth > 0):
            raise LayoutSemanticError("width and depth must be positive", i)
        try:
            points = tuple(Point3(*(c / scale for c in v)) for v in verts)
            wires.append(WirePath(points, CrossSection(width, depth), raw["current_A"]))
        except ValueError as exc:
            raise LayoutSemanticError(str(exc), i) from exc
    return WireLayout(tuple(wires), name)


def serialize_layout(layout: WireLayout, unit: str = "m") -> str:
    """Inverse of :func:`parse_layout`. ``unit="m"`` round-trips bit-exactly."""
    if unit not in UNIT_SCALE:
        raise ValueError(f"unit must be one of {sorted(UNIT_SCALE)}")
    s = UNIT_SCALE[unit]
    doc = {
        "name": layout.name,
        "unit": unit,
        "wires": [
            {
                "vertices": [[v.x * s, v.y * s, v.z * s] for v in w.vertices],
                "width": w.width * s,
                "depth": w.depth * s,
                "current_A": w.current,
            }
            for w in layout.wires
        ],
    }
    return json.dumps(doc, indent=2) + "\n"


def load_layout(path) -> WireLayout:
    with open(path, encoding="utf-8") as fh:
        return parse_layout(fh.read())


def _is_number(v) -> bool:
    return isinstance(v, (int, float)) and not isinstance(v, bool) and math.isfinite(v)


# --- builders -----------------------------------------------------------------


def pair_centre_offset(width: float, separation: float, convention: str = "edge") -> float:
    """Distance |z| of each pair centerline from the symmetry plane.

    ``convention="edge"`` reads ``separation`` as the gap between facing
    edges, ``"centre"`` as the centre-to-centre distance.
    """
    if convention == "edge":
        return (separation + width) / 2
    if convention == "centre":
        return separation / 2
    raise ValueError(f"unknown separation convention {convention!r}")


def antiparallel_pair(
    width: float,
    depth: float,
    separation: float,
    length: float,
    current: float,
    convention: str = "edge",
) -> WireLayout:
    """Two straight wires along x at z = +-offset carrying +current and -current.

    The wire tops sit flush with the surface y = 0, so centroids are at
    y = -depth/2.
    """
    if not (width > 0 and depth > 0 and length > 0 and current > 0):
        raise ValueError("width, depth, length and current must be positive")
    if separation < 0 or (separation == 0 and convention == "centre"):
        raise ValueError("separation must be positive")
    zc = pair_centre_offset(width, separation, convention)
    if convention == "centre" and zc < width / 2:
        raise ValueError("centre-to-centre separation smaller than the wire width")
    yc = -depth / 2
    xs = (-length / 2, length / 2)
    cs = CrossSection(width, depth)
    plus = WirePath((Point3(xs[0], yc, zc), Point3(xs[1], yc, zc)), cs, current)
    minus = WirePath((Point3(xs[0], yc, -zc), Point3(xs[1], yc, -zc)), cs, -current)
    return WireLayout((plus, minus), name="antiparallel pair")


def routed_pair_offsets(
    width: float, separation: float, return_gap: float, n_returns: int
) -> list[float]:
    """Centerline |z| of the pair wire followed by its return legs on one side."""
    a = pair_centre_offset(width, separation)
    zs = [a]
    if n_returns:
        zs.append(a + width + return_gap)
        for _ in range(n_returns - 1):
            zs.append(zs[-1] + width + separation)
    return zs


def routed_pair(
    width: float,
    depth: float,
    separation: float,
    length: float,
    current: float,
    return_gap: float,
    lead_length: float,
    n_returns: int = 2,
) -> WireLayout:
    """Antiparallel gate-zone pair with return legs and U-shaped leads to pads.

    Each side of the symmetry plane carries a bundle: the pair wire at the
    inner position and ``n_returns`` return legs outside it, the first one
    ``return_gap`` (edge to edge) away and the rest at the pair's edge gap.
    Return legs carry current opposite to their pair wire. At the ends of
    the gate zone every bundle member turns 90 degrees away from the axis
    and runs to a common pad line at |z| = pair offset + ``lead_length``.
    The bundle keeps a constant pitch through the bends so no wires cross.
    The pair wire's straight gate section is ``length`` long.
    """
    if not (width > 0 and depth > 0 and length > 0 and current > 0):
        raise ValueError("width, depth, length and current must be positive")
    if separation < 0 or return_gap < 0 or lead_length <= 0 or n_returns < 0:
        raise ValueError("invalid routing parameters")
    zs = routed_pair_offsets(width, separation, return_gap, n_returns)
    a = zs[0]
    pad_z = a + lead_length
    if pad_z <= zs[-1]:
        raise ValueError("lead_length too short to clear the outermost return leg")
    cs = CrossSection(width, depth)
    yc = -depth / 2
    wires = []
    for side in (1.0, -1.0):
        for k, z in enumerate(zs):
            half = length / 2 - (z - a)
            if half <= width:
                raise ValueError("gate section too short for the return bundle")
            verts = (
                Point3(-half, yc, side * pad_z),
                Point3(-half, yc, side * z),
                Point3(half, yc, side * z),
                Point3(half, yc, side * pad_z),
            )
            sign = 1.0 if k == 0 else -1.0
            wires.append(WirePath(verts, cs, side * sign * current))
    return WireLayout(tuple(wires), name="routed antiparallel pair")


def routed_pair_length(
    width: float, separation: float, length: float, return_gap: float, lead_length: float,
    n_returns: int = 2,
) -> float:
    """Total centerline length of :func:`routed_pair` without building it."""
    zs = routed_pair_offsets(width, separation, return_gap, n_returns)
    a = zs[0]
    pad_z = a + lead_length
    per_side = sum(2 * (length / 2 - (z - a)) + 2 * (pad_z - z) for z in zs)
    return 2 * per_side


# --- discretization -------------------------------------------------------------


def _segment_frames(verts: np.ndarray):
    """Unit direction, vertical and lateral axes for every segment."""
    t = np.diff(verts, axis=0)
    t /= np.linalg.norm(t, axis=1)[:, None]
    up = np.array([0.0, 1.0, 0.0])
    v = up - (t @ up)[:, None] * t
    vn = np.linalg.norm(v, axis=1)
    if np.any(vn < 1e-9):
        raise DegenerateSegmentError("vertical segment has no defined lateral direction")
    v /= vn[:, None]
    u = np.cross(t, v)
    return t, u, v


def _miter(axes: np.ndarray, i: int, closed: bool = False) -> np.ndarray:
    """Offset direction at vertex ``i`` scaled so the perpendicular offset is preserved.

    On a closed path the first/last vertex is mitered like an interior one.
    """
    n_seg = len(axes)
    if closed and i in (0, n_seg):
        prev, nxt = axes[-1], axes[0]
    elif i == 0:
        return axes[0]
    elif i == n_seg:
        return axes[-1]
    else:
        prev, nxt = axes[i - 1], axes[i]
    m = prev + nxt
    norm = np.linalg.norm(m)
    if norm < 1e-9:
        raise DegenerateSegmentError(f"path folds back on itself at vertex {i}")
    m /= norm
    return m / np.dot(m, nxt)


def discretize(path: WirePath, n_w: int = DEFAULT_N_W, n_d: int = DEFAULT_N_D) -> list[Filament]:
    """Split a wire into ``n_w * n_d`` parallel filaments per segment.

    Filaments sit at the centroids of the sub-rectangles of the
    cross-section. Offsets are perpendicular to each segment and mitered at
    interior vertices so filaments of neighbouring segments join up. A path
    whose last vertex equals its first is treated as a closed loop and is
    mitered there too.
    """
    starts, ends, currents = _discretize_arrays(path, n_w, n_d)
    return [
        Filament(Point3.from_seq(s), Point3.from_seq(e), float(c))
        for s, e, c in zip(starts, ends, currents)
    ]


def _split_current(current: float, n: int) -> list[float]:
    # last share absorbs rounding so a left-to-right sum returns `current` exactly
    share = current / n
    shares = [share] * (n - 1)
    shares.append(current - sum(shares))
    return shares


def _discretize_arrays(path: WirePath, n_w: int, n_d: int):
    if n_w < 1 or n_d < 1:
        raise ValueError("n_w and n_d must be >= 1")
    verts = path.vertex_array()
    t, u_ax, v_ax = _segment_frames(verts)
    n_v = len(verts)
    closed = n_v >= 4 and np.array_equal(verts[0], verts[-1])
    mu = np.array([_miter(u_ax, i, closed) for i in range(n_v)])
    mv = np.array([_miter(v_ax, i, closed) for i in range(n_v)])
    w, d = path.width, path.depth
    us = -w / 2 + (np.arange(n_w) + 0.5) * w / n_w
    vs = -d / 2 + (np.arange(n_d) + 0.5) * d / n_d
    shares = _split_current(path.current, n_w * n_d)

    starts, ends, currents = [], [], []
    for s in range(n_v - 1):
        k = 0
        for u in us:
            for v in vs:
                a = verts[s] + u * mu[s] + v * mv[s]
                b = verts[s + 1] + u * mu[s + 1] + v * mv[s + 1]
                seg = b - a
                if np.linalg.norm(seg) < 1e-15 or np.dot(seg, t[s]) <= 0:
                    raise DegenerateSegmentError(
                        f"segment {s} collapses after offsetting (u={u:.3g}, v={v:.3g})"
                    )
                starts.append(a)
                ends.append(b)
                currents.append(shares[k])
                k += 1
    return np.array(starts), np.array(ends), np.array(currents)


@dataclass(frozen=True)
class FilamentSet:
    """Flat filament arrays for a whole layout, ready for vectorised field sums."""

    starts: np.ndarray
    ends: np.ndarray
    currents: np.ndarray
    wire_index: np.ndarray = field(repr=False)

    def __post_init__(self):
        for arr in (self.starts, self.ends, self.currents, self.wire_index):
            arr.flags.writeable = False

    def __len__(self):
        return len(self.currents)

    @classmethod
    def from_layout(cls, layout: WireLayout, n_w: int = DEFAULT_N_W, n_d: int = DEFAULT_N_D):
        parts = [_discretize_arrays(w, n_w, n_d) for w in layout.wires]
        idx = np.concatenate([np.full(len(p[2]), i) for i, p in enumerate(parts)])
        return cls(
            np.concatenate([p[0] for p in parts]),
            np.concatenate([p[1] for p in parts]),
            np.concatenate([p[2] for p in parts]),
            idx,
        )

    @classmethod
    def from_filaments(cls, filaments: Iterable[Filament]):
        fils = list(filaments)
        return cls(
            np.array([f.start.as_array() for f in fils]),
            np.array([f.end.as_array() for f in fils]),
            np.array([f.current for f in fils]),
            np.zeros(len(fils), dtype=int),
        )


# --- derived quantities -------------------------------------------------------------


def squares(path: WirePath) -> float:
    """Number of sheet-resistance squares: centerline length over width."""
    return path.length / path.width


def current_density(path: WirePath, current: float) -> float:
    """Current density in A/cm^2 for ``current`` through the wire cross-section."""
    # convert each side to cm first; this keeps round inputs exact
    return abs(current) / ((path.width * 1e2) * (path.depth * 1e2))


def inside_conductor(layout: WireLayout, points: np.ndarray) -> np.ndarray:
    """Index of the wire whose volume strictly contains each point, else -1.

    Each segment is treated as a rectangular prism; miter wedges at corners
    are not included.
    """
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    hit = np.full(len(pts), -1)
    for wi, w in enumerate(layout.wires):
        verts = w.vertex_array()
        try:
            t, u_ax, v_ax = _segment_frames(verts)
        except DegenerateSegmentError:
            continue
        lengths = w.segment_lengths()
        for s in range(len(verts) - 1):
            rel = pts - verts[s]
            along = rel @ t[s]
            inside = (
                (along > 0)
                & (along < lengths[s])
                & (np.abs(rel @ u_ax[s]) < w.width / 2)
                & (np.abs(rel @ v_ax[s]) < w.depth / 2)
            )
            hit[inside & (hit < 0)] = wi
    return hit
