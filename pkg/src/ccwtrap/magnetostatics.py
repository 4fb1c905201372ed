"""Magnetic fields of wire layouts by analytic finite-segment Biot-Savart sums.

Every conductor is replaced by a bundle of straight filaments
(:class:`~ccwtrap.geometry.FilamentSet`) and the closed-form field of each
straight segment is summed. Derivatives are central differences of that
analytic field.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Sequence

import numpy as np

from .geometry import (
    DEFAULT_N_D,
    DEFAULT_N_W,
    Filament,
    FilamentSet,
    Point3,
    WireLayout,
    inside_conductor,
)

MU_0 = 4e-7 * math.pi  # T m / A
SINGULAR_DISTANCE = 1e-12  # m
DEFAULT_STEP = 1e-7  # m
_CHUNK = 4096


class SingularityError(ArithmeticError):
    """Field requested on a filament, where the line-current field diverges."""

    def __init__(self, message: str, wire_index: int | None = None):
        if wire_index is not None:
            message = f"wire {wire_index}: {message}"
        super().__init__(message)
        self.wire_index = wire_index


class ConductorIntersectionError(ValueError):
    """Evaluation point(s) inside a conductor volume."""

    def __init__(self, message: str, indices=()):
        super().__init__(message)
        self.indices = list(indices)


class NotBracketedError(RuntimeError):
    """The |B| minimum lies on (or beyond) the search box boundary."""


@dataclass(frozen=True)
class Discretization:
    n_w: int = DEFAULT_N_W
    n_d: int = DEFAULT_N_D

    def __post_init__(self):
        if self.n_w < 1 or self.n_d < 1:
            raise ValueError("discretization counts must be >= 1")

    def doubled(self) -> "Discretization":
        return Discretization(2 * self.n_w, 2 * self.n_d)


DEFAULT_DISCRETIZATION = Discretization()


@dataclass(frozen=True)
class FieldVector:
    Bx: float
    By: float
    Bz: float

    @property
    def magnitude(self) -> float:
        return math.sqrt(self.Bx**2 + self.By**2 + self.Bz**2)

    def as_array(self) -> np.ndarray:
        return np.array([self.Bx, self.By, self.Bz])

    @classmethod
    def from_array(cls, b) -> "FieldVector":
        return cls(float(b[0]), float(b[1]), float(b[2]))


@dataclass(frozen=True)
class GradientResult:
    """Field derivatives at a point.

    ``jacobian[i, j]`` is dB_i/dx_j in T/m. ``grad_mag`` is the gradient of
    |B| (zero vector exactly at a null). ``axis_gradient[j]`` is |J e_j|,
    the rate at which |B| grows when moving along axis ``j`` out of a null;
    away from a null it is the norm of dB/dx_j.
    """

    point: Point3
    field: FieldVector
    jacobian: np.ndarray
    grad_mag: np.ndarray
    axis_gradient: np.ndarray

    @property
    def divergence(self) -> float:
        return float(np.trace(self.jacobian))

    @property
    def curl(self) -> np.ndarray:
        j = self.jacobian
        return np.array([j[2, 1] - j[1, 2], j[0, 2] - j[2, 0], j[1, 0] - j[0, 1]])


@dataclass(frozen=True)
class FieldMap:
    """Field samples on a rectilinear grid; ``B`` has shape (nx, ny, nz, 3)."""

    x: np.ndarray
    y: np.ndarray
    z: np.ndarray
    B: np.ndarray

    @property
    def shape(self) -> tuple[int, int, int]:
        return (len(self.x), len(self.y), len(self.z))

    @property
    def magnitude(self) -> np.ndarray:
        return np.linalg.norm(self.B, axis=-1)

    def points(self) -> np.ndarray:
        X, Y, Z = np.meshgrid(self.x, self.y, self.z, indexing="ij")
        return np.stack([X.ravel(), Y.ravel(), Z.ravel()], axis=1)

    def rows(self):
        """(x, y, z, Bx, By, Bz, |B|) tuples in C order over (x, y, z)."""
        pts = self.points()
        b = self.B.reshape(-1, 3)
        mag = self.magnitude.ravel()
        for p, v, m in zip(pts, b, mag):
            yield (*p.tolist(), *v.tolist(), float(m))

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["x", "y", "z", "Bx", "By", "Bz", "B_abs"])
        for row in self.rows():
            writer.writerow([repr(v) for v in row])
        return buf.getvalue()

    def to_json(self) -> str:
        doc = {
            "units": {"length": "m", "field": "T"},
            "x": self.x.tolist(),
            "y": self.y.tolist(),
            "z": self.z.tolist(),
            "shape": list(self.shape),
            "B": self.B.reshape(-1, 3).tolist(),
        }
        return json.dumps(doc) + "\n"

    def local_minima(self) -> list[tuple[int, int, int]]:
        """Grid indices of strict |B| local minima over the non-degenerate axes."""
        mag = self.magnitude
        out = []
        it = np.nditer(mag, flags=["multi_index"])
        for val in it:
            idx = it.multi_index
            is_min = True
            for ax in range(3):
                for step in (-1, 1):
                    j = list(idx)
                    j[ax] += step
                    if 0 <= j[ax] < mag.shape[ax] and mag[tuple(j)] <= val:
                        is_min = False
            if is_min and any(n > 1 for n in mag.shape):
                out.append(idx)
        return out


@dataclass(frozen=True)
class QuadrupolePoint:
    """Located |B| minimum.

    ``gradient_per_amp`` holds |J e_j| / I for j = x, y, z (the limit of
    d|B|/dx_j leaving the null); ``jacobian_per_amp`` is the full tensor
    dB_i/dx_j / I, so the tensor component dBz/dz is
    ``jacobian_per_amp[2, 2]``. I is the layout's drive current.
    """

    position: Point3
    residual_B: float
    gradient_per_amp: np.ndarray
    jacobian_per_amp: np.ndarray
    iterations: int

    @property
    def axial_gradient_per_amp(self) -> float:
        return float(self.gradient_per_amp[2])


# --- Biot-Savart kernel ------------------------------------------------------------


def biot_savart(points, starts, ends, currents, wire_index=None) -> np.ndarray:
    """Field (n, 3) at ``points`` from straight segments ``starts -> ends``.

    Closed form of the finite straight segment,
    B = mu0 I / (4 pi) * (r1 x r2)(|r1| + |r2|) / (|r1||r2| (|r1||r2| + r1.r2)),
    with r1, r2 the vectors from the segment ends to the field point.
    Where r1.r2 < 0 the bracket is evaluated as |r1 x r2|^2 / (|r1||r2| - r1.r2),
    which avoids cancellation for points close to long segments.
    Points on a segment raise :class:`SingularityError`; points on its
    extension get zero field.
    """
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    A = np.asarray(starts, dtype=float)
    B = np.asarray(ends, dtype=float)
    I = np.asarray(currents, dtype=float)
    out = np.zeros((len(pts), 3))
    if len(I) == 0:
        return out
    seg = B - A
    seg_len2 = np.sum(seg * seg, axis=1)
    for lo in range(0, len(pts), _CHUNK):
        p = pts[lo : lo + _CHUNK]
        r1 = p[:, None, :] - A[None, :, :]
        r2 = p[:, None, :] - B[None, :, :]
        # distance to the closed segment, for the singularity guard
        s = np.clip(np.einsum("nmk,mk->nm", r1, seg) / seg_len2, 0.0, 1.0)
        perp = r1 - s[..., None] * seg[None]
        dist = np.sqrt(np.sum(perp * perp, axis=-1))
        bad = dist < SINGULAR_DISTANCE
        if np.any(bad):
            n_i, m_i = np.argwhere(bad)[0]
            wi = None if wire_index is None else int(wire_index[m_i])
            raise SingularityError(
                f"field point {p[n_i].tolist()} lies on filament {int(m_i)}", wi
            )
        n1 = np.sqrt(np.sum(r1 * r1, axis=-1))
        n2 = np.sqrt(np.sum(r2 * r2, axis=-1))
        dot = np.sum(r1 * r2, axis=-1)
        # r1 x r2 == seg x r1, which does not cancel when |r1|, |r2| >> distance
        cross = np.cross(seg[None, :, :], r1)
        c2 = np.sum(cross * cross, axis=-1)
        n12 = n1 * n2
        with np.errstate(divide="ignore", invalid="ignore"):
            bracket = np.where(dot < 0, c2 / (n12 - dot), n12 + dot)
        denom = n12 * bracket
        # denom -> 0 only on the segment itself, excluded above
        factor = (MU_0 / (4 * math.pi)) * I[None, :] * (n1 + n2) / denom
        out[lo : lo + _CHUNK] = np.einsum("nm,nmk->nk", factor, cross)
    return out


def segment_field(point: Point3, filament: Filament) -> FieldVector:
    """Exact field of one finite straight filament."""
    b = biot_savart(
        [tuple(point)], [filament.start.as_array()], [filament.end.as_array()], [filament.current]
    )[0]
    return FieldVector.from_array(b)


@lru_cache(maxsize=64)
def filaments_for(layout: WireLayout, disc: Discretization = DEFAULT_DISCRETIZATION) -> FilamentSet:
    return FilamentSet.from_layout(layout, disc.n_w, disc.n_d)


def _check_outside(layout: WireLayout, pts: np.ndarray) -> None:
    hit = inside_conductor(layout, pts)
    if np.any(hit >= 0):
        bad = np.flatnonzero(hit >= 0)
        raise ConductorIntersectionError(
            f"{len(bad)} point(s) inside conductor volume, first {pts[bad[0]].tolist()} "
            f"in wire {int(hit[bad[0]])}",
            bad.tolist(),
        )


def field_at(
    points, layout: WireLayout, disc: Discretization = DEFAULT_DISCRETIZATION, check: bool = True
) -> np.ndarray:
    """Vectorised :func:`layout_field`: (n, 3) array of B for an (n, 3) array of points."""
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    if check:
        _check_outside(layout, pts)
    fs = filaments_for(layout, disc)
    return biot_savart(pts, fs.starts, fs.ends, fs.currents, fs.wire_index)


def layout_field(
    point: Point3, layout: WireLayout, disc: Discretization = DEFAULT_DISCRETIZATION
) -> FieldVector:
    """Superposed field of all filaments of all wires at ``point``."""
    return FieldVector.from_array(field_at([tuple(point)], layout, disc)[0])


def _axis(values) -> np.ndarray:
    arr = np.atleast_1d(np.asarray(values, dtype=float))
    if arr.ndim != 1 or len(arr) == 0:
        raise ValueError("grid axes must be non-empty 1-D sequences")
    return arr


def field_map(
    layout: WireLayout,
    x,
    y,
    z,
    disc: Discretization = DEFAULT_DISCRETIZATION,
) -> FieldMap:
    """Sample B on the tensor grid x × y × z (scalars make an axis degenerate)."""
    xs, ys, zs = _axis(x), _axis(y), _axis(z)
    X, Y, Z = np.meshgrid(xs, ys, zs, indexing="ij")
    pts = np.stack([X.ravel(), Y.ravel(), Z.ravel()], axis=1)
    hit = inside_conductor(layout, pts)
    if np.any(hit >= 0):
        flat = np.flatnonzero(hit >= 0)
        idx = [tuple(int(i) for i in np.unravel_index(f, X.shape)) for f in flat]
        raise ConductorIntersectionError(
            f"{len(idx)} grid point(s) inside conductors, first at index {idx[0]}", idx
        )
    b = field_at(pts, layout, disc, check=False)
    return FieldMap(xs, ys, zs, b.reshape(X.shape + (3,)))


def horizontal_plane(
    layout: WireLayout,
    height: float,
    x_half: float,
    z_half: float,
    n: int,
    disc: Discretization = DEFAULT_DISCRETIZATION,
) -> FieldMap:
    """|B| map in the plane y = ``height``, n × n points centred on x = z = 0."""
    return field_map(
        layout, np.linspace(-x_half, x_half, n), height, np.linspace(-z_half, z_half, n), disc
    )


# --- derivatives -------------------------------------------------------------------


def _jacobian(center: np.ndarray, layout, disc, step) -> tuple[np.ndarray, np.ndarray]:
    stencil = [center]
    for j in range(3):
        e = np.zeros(3)
        e[j] = step
        stencil += [center + e, center - e]
    pts = np.array(stencil)
    hit = inside_conductor(layout, pts)
    if np.any(hit >= 0):
        raise ConductorIntersectionError(
            f"gradient stencil at {center.tolist()} intersects wire {int(hit[hit >= 0][0])}",
            np.flatnonzero(hit >= 0).tolist(),
        )
    fs = filaments_for(layout, disc)
    b = biot_savart(pts, fs.starts, fs.ends, fs.currents, fs.wire_index)
    jac = np.empty((3, 3))
    for j in range(3):
        jac[:, j] = (b[1 + 2 * j] - b[2 + 2 * j]) / (2 * step)
    return b[0], jac


def gradient(
    point: Point3,
    layout: WireLayout,
    disc: Discretization = DEFAULT_DISCRETIZATION,
    step: float = DEFAULT_STEP,
) -> GradientResult:
    """Central-difference Jacobian of B and the gradient of |B| at ``point``."""
    if step <= 0:
        raise ValueError("step must be positive")
    center = np.array(tuple(point), dtype=float)
    b, jac = _jacobian(center, layout, disc, step)
    mag = np.linalg.norm(b)
    grad_mag = jac.T @ b / mag if mag > 0 else np.zeros(3)
    return GradientResult(
        Point3.from_seq(center),
        FieldVector.from_array(b),
        jac,
        grad_mag,
        np.linalg.norm(jac, axis=0),
    )


# --- quadrupole search ----------------------------------------------------------


def find_quadrupole(
    layout: WireLayout,
    box: Sequence[tuple[float, float]],
    disc: Discretization = DEFAULT_DISCRETIZATION,
    pitch: float = 2e-6,
    tol: float = 1e-8,
    step: float = DEFAULT_STEP,
    max_iter: int = 100,
) -> QuadrupolePoint:
    """Locate the |B| minimum inside an axis-aligned box.

    ``box`` is ((x0, x1), (y0, y1), (z0, z1)); an axis with x0 == x1 is held
    fixed. A grid scan at ``pitch`` picks the starting point, which is then
    refined by damped Gauss-Newton steps on B(r) = 0 (least-squares steps,
    so a line of nulls does not make the step blow up) until the step is
    shorter than ``tol``.
    """
    box = [(float(lo), float(hi)) for lo, hi in box]
    if len(box) != 3 or any(hi < lo for lo, hi in box):
        raise ValueError("box must be three (lo, hi) pairs with lo <= hi")
    axes = []
    for lo, hi in box:
        if hi == lo:
            axes.append(np.array([lo]))
        else:
            n = max(int(round((hi - lo) / pitch)), 2) + 1
            axes.append(np.linspace(lo, hi, n))
    fmap = field_map(layout, *axes, disc=disc)
    mag = fmap.magnitude
    idx = np.unravel_index(int(np.argmin(mag)), mag.shape)
    for ax, i in enumerate(idx):
        if len(axes[ax]) > 1 and i in (0, len(axes[ax]) - 1):
            raise NotBracketedError(
                f"|B| minimum of the grid scan sits on the box boundary along axis {'xyz'[ax]}"
            )
    free = [ax for ax in range(3) if len(axes[ax]) > 1]
    r = np.array([axes[ax][i] for ax, i in enumerate(idx)])
    b, jac = _jacobian(r, layout, disc, step)
    it = 0
    for it in range(1, max_iter + 1):
        if not free:
            break
        jf = jac[:, free]
        delta_free, *_ = np.linalg.lstsq(jf, -b, rcond=None)
        delta = np.zeros(3)
        delta[free] = delta_free
        lam, accepted = 1.0, False
        mag0 = np.linalg.norm(b)
        while lam > 1e-6:
            trial = r + lam * delta
            b_t, jac_t = _jacobian(trial, layout, disc, step)
            if np.linalg.norm(b_t) < mag0:
                accepted = True
                break
            lam /= 2
        if not accepted:
            break
        moved = np.linalg.norm(lam * delta)
        r, b, jac = trial, b_t, jac_t
        if moved < tol:
            break
    for ax in free:
        lo, hi = box[ax]
        if not (lo < r[ax] < hi):
            raise NotBracketedError(f"refined minimum left the search box along {'xyz'[ax]}")
    current = layout.drive_current
    return QuadrupolePoint(
        Point3.from_seq(r),
        float(np.linalg.norm(b)),
        np.linalg.norm(jac, axis=0) / current,
        jac / current,
        it,
    )


def box_around(center: Sequence[float], half: Sequence[float] | float) -> list[tuple[float, float]]:
    if np.isscalar(half):
        half = (half, half, half)
    return [(c - h, c + h) for c, h in zip(center, half)]


def thin_wire_reference(
    separation: float, height: float, current: float = 1.0, length: float = 4e-3
) -> float:
    """Axial gradient per ampere of two ideal line currents on the surface.

    The wires run along x at y = 0, z = +-separation/2 (centre to centre),
    carrying +current and -current; the value is |J e_z| / I at
    (0, height, 0).
    """
    if not (separation > 0 and height > 0 and current > 0 and length > 0):
        raise ValueError("arguments must be positive")
    h = separation / 2
    starts = np.array([[-length / 2, 0.0, h], [-length / 2, 0.0, -h]])
    ends = np.array([[length / 2, 0.0, h], [length / 2, 0.0, -h]])
    currents = np.array([current, -current])
    step = min(DEFAULT_STEP, height * 1e-3)
    c = np.array([0.0, height, 0.0])
    cols = []
    for j in range(3):
        e = np.zeros(3)
        e[j] = step
        bp = biot_savart([c + e], starts, ends, currents)[0]
        bm = biot_savart([c - e], starts, ends, currents)[0]
        cols.append((bp - bm) / (2 * step))
    return float(np.linalg.norm(cols[2]) / current)


def converged_discretization(
    layout: WireLayout,
    point: Point3,
    start: Discretization = DEFAULT_DISCRETIZATION,
    rel_tol: float = 5e-3,
    max_doublings: int = 4,
) -> tuple[Discretization, float]:
    """Double (n_w, n_d) from ``start`` until |B| at ``point`` changes by < ``rel_tol``.

    Returns the accepted discretization and the last relative change.
    """
    disc = start
    prev = layout_field(point, layout, disc).magnitude
    change = math.inf
    for _ in range(max_doublings):
        nxt = disc.doubled()
        cur = layout_field(point, layout, nxt).magnitude
        change = abs(cur - prev) / max(abs(cur), 1e-300)
        if change < rel_tol:
            return disc, change
        disc, prev = nxt, cur
    return disc, change
