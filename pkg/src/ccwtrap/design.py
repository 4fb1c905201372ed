"""Design evaluation, constraint checks and exhaustive parameter sweeps.

A :class:`DesignPoint` describes the gate-zone wire pair. It is turned into
a routed layout (:func:`ccwtrap.geometry.routed_pair`) whose return legs
are placed so that the field null sits at the ion height, and the metrics
are read off at that null.
"""

from __future__ import annotations

import csv
import io
import itertools
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, fields, replace
from typing import Mapping, Sequence

import numpy as np
from scipy.optimize import brentq

from .electrothermal import (
    OperatingPoint,
    ResistivityModel,
    ThermalEnvironment,
    operating_point,
)
from .geometry import (
    Point3,
    WireLayout,
    current_density,
    routed_pair,
    routed_pair_length,
    routed_pair_offsets,
)
from .magnetostatics import (
    DEFAULT_DISCRETIZATION,
    Discretization,
    NotBracketedError,
    box_around,
    field_at,
    find_quadrupole,
)

REFERENCE_SQUARES = 390.0
# lead length that makes the reconstructed structure total 390 squares;
# regenerate with reconstruct_lead_length()
REFERENCE_LEAD_LENGTH = 1.7944e-3


class NullPlacementError(RuntimeError):
    """No return-leg placement puts a field null at the requested ion height."""


@dataclass(frozen=True)
class DesignPoint:
    width: float
    depth: float
    separation: float
    length: float
    current: float
    ion_height: float = 125e-6
    lead_length: float = REFERENCE_LEAD_LENGTH
    n_returns: int = 2

    def __post_init__(self):
        for name in ("width", "depth", "separation", "length", "current", "ion_height",
                     "lead_length"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        if self.n_returns < 1:
            raise ValueError("n_returns must be >= 1")

    def key(self) -> tuple:
        return tuple(getattr(self, f.name) for f in fields(self))


def reference_design(current: float = 1.0) -> DesignPoint:
    """Gate-zone pair of the reference device: 100 um wide, 15 um deep, 88 um gap, 4 mm long."""
    return DesignPoint(100e-6, 15e-6, 88e-6, 4e-3, current)


@dataclass(frozen=True)
class Constraints:
    j_max: float = 1e6  # A/cm^2
    gradient_target: tuple[float, float] = (100.0, 150.0)  # T/m
    power_budget: float = math.inf  # W
    t_op_max: float = math.inf  # K
    storage_b_max: float = 2e-3  # T
    storage_points: tuple[Point3, ...] | None = None  # default: +-5 mm along z at ion height

    def __post_init__(self):
        lo, hi = self.gradient_target
        if lo < 0 or hi < lo:
            raise ValueError("gradient_target must satisfy 0 <= lo <= hi")
        for name in ("j_max", "power_budget", "t_op_max", "storage_b_max"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be non-negative")

    def storage_for(self, design: DesignPoint) -> tuple[Point3, ...]:
        if self.storage_points is not None:
            return tuple(self.storage_points)
        h = design.ion_height
        return (Point3(0.0, h, 5e-3), Point3(0.0, h, -5e-3))

    def relaxed(self, **changes) -> "Constraints":
        return replace(self, **changes)


@dataclass(frozen=True)
class Verdict:
    name: str
    passed: bool
    value: float
    bound: float | tuple[float, float]


@dataclass(frozen=True)
class Metrics:
    design: DesignPoint
    gradient_per_amp: float  # T/m/A, |d|B|/dz| at the null
    dbz_dz_per_amp: float  # T/m/A, quadrupole tensor component
    gradient_at_current: float  # T/m
    current_density: float  # A/cm^2
    power: float  # W
    t_op: float  # K
    resistance: float  # ohm at t_op
    storage_b: tuple[float, ...]  # T
    quadrupole: Point3 | None
    residual_b: float
    return_gap: float | None
    converged: bool
    verdicts: tuple[Verdict, ...] = ()

    @property
    def feasible(self) -> bool:
        return all(v.passed for v in self.verdicts)

    def verdict(self, name: str) -> Verdict:
        for v in self.verdicts:
            if v.name == name:
                return v
        raise KeyError(name)


# --- layout construction -----------------------------------------------------


def _axis_by(design: DesignPoint, gap: float, lead: float, disc: Discretization) -> float:
    layout = routed_pair(
        design.width, design.depth, design.separation, design.length, 1.0, gap, lead,
        design.n_returns,
    )
    return float(field_at([(0.0, design.ion_height, 0.0)], layout, disc)[0, 1])


def _gap_limit(design: DesignPoint, lead: float) -> float:
    """Largest return gap that still fits inside the gate section and under the pads."""
    zs = routed_pair_offsets(design.width, design.separation, 0.0, design.n_returns)
    extent = zs[-1] - zs[0]  # bundle width beyond the pair wire at zero gap
    by_pads = lead - extent - design.width
    by_length = design.length / 2 - design.width - extent - design.width
    return min(by_pads, by_length)


def solve_return_gap(
    design: DesignPoint,
    lead_length: float | None = None,
    disc: Discretization = DEFAULT_DISCRETIZATION,
) -> float:
    """Edge gap between pair wire and first return leg that nulls B at the ion height.

    On the symmetry axis only By survives, so the null condition is
    By(0, h, 0) = 0. The smallest gap with a sign change is used.
    """
    lead = design.lead_length if lead_length is None else lead_length
    g_max = _gap_limit(design, lead)
    if g_max <= 1e-6:
        raise NullPlacementError("no room for return legs")
    grid = np.geomspace(1e-6, g_max, 60)
    vals = [_axis_by(design, g, lead, disc) for g in grid]
    for g0, g1, v0, v1 in zip(grid[:-1], grid[1:], vals[:-1], vals[1:]):
        if v0 == 0:
            return float(g0)
        if v0 * v1 < 0:
            return float(
                brentq(lambda g: _axis_by(design, g, lead, disc), g0, g1, xtol=1e-13, rtol=1e-14)
            )
    raise NullPlacementError(
        f"no return gap up to {g_max:.3g} m puts a null at y = {design.ion_height:.3g} m"
    )


def design_layout(
    design: DesignPoint, current: float | None = None, disc: Discretization = DEFAULT_DISCRETIZATION
) -> tuple[WireLayout, float]:
    """Routed layout for ``design`` (at ``current``, default the design current) and its return gap."""
    gap = solve_return_gap(design, disc=disc)
    layout = routed_pair(
        design.width, design.depth, design.separation, design.length,
        design.current if current is None else current, gap, design.lead_length, design.n_returns,
    )
    return layout, gap


def reconstruct_lead_length(
    design: DesignPoint | None = None,
    target_squares: float = REFERENCE_SQUARES,
    disc: Discretization = DEFAULT_DISCRETIZATION,
) -> float:
    """Lead length for which the null-placed routed structure totals ``target_squares``."""
    design = design or reference_design()

    def excess(lead):
        gap = solve_return_gap(design, lead, disc)
        total = routed_pair_length(
            design.width, design.separation, design.length, gap, lead, design.n_returns
        )
        return total / design.width - target_squares

    return brentq(excess, 0.8e-3, 4e-3, xtol=1e-10)


def reconstructed_layout(current: float = 1.0) -> WireLayout:
    """Routed gate-zone reconstruction of the reference device (see docs/reconstruction.md)."""
    layout, _ = design_layout(reference_design(current))
    return WireLayout(layout.wires, "reconstructed routed gate zone (not the fabricated mask)")


# --- evaluation -----------------------------------------------------------------


def check_constraints(metrics: Metrics, constraints: Constraints) -> tuple[Verdict, ...]:
    """Named verdicts; every bound is a closed inequality (equality passes)."""
    lo, hi = constraints.gradient_target
    g = metrics.gradient_at_current
    storage = max(metrics.storage_b) if metrics.storage_b else 0.0
    return (
        Verdict("current_density", metrics.current_density <= constraints.j_max,
                metrics.current_density, constraints.j_max),
        Verdict("power_budget", metrics.power <= constraints.power_budget,
                metrics.power, constraints.power_budget),
        Verdict("operating_temperature", metrics.t_op <= constraints.t_op_max,
                metrics.t_op, constraints.t_op_max),
        Verdict("storage_field", storage <= constraints.storage_b_max,
                storage, constraints.storage_b_max),
        Verdict("gradient_target", bool(lo <= g <= hi), g, (lo, hi)),
        Verdict("operating_point_converged", metrics.converged, float(metrics.converged), 1.0),
        Verdict("quadrupole_found", metrics.quadrupole is not None,
                float(metrics.quadrupole is not None), 1.0),
    )


def evaluate(
    design: DesignPoint,
    env: ThermalEnvironment | None = None,
    model: ResistivityModel | None = None,
    constraints: Constraints | None = None,
    disc: Discretization = DEFAULT_DISCRETIZATION,
    search_half: float = 10e-6,
) -> Metrics:
    """Build the routed layout, locate its null and collect all metrics."""
    env = env or ThermalEnvironment()
    model = model or ResistivityModel()
    constraints = constraints or Constraints()
    I = design.current

    try:
        unit_layout, gap = design_layout(design, current=1.0, disc=disc)
    except NullPlacementError:
        unit_layout, gap = None, None

    quad = None
    g_per_amp = dbz = residual = math.nan
    if unit_layout is not None:
        try:
            q = find_quadrupole(
                unit_layout, box_around((0.0, design.ion_height, 0.0), search_half), disc
            )
            quad = q.position
            g_per_amp = float(q.gradient_per_amp[2])
            dbz = float(q.jacobian_per_amp[2, 2])
            residual = q.residual_B * I
        except NotBracketedError:
            pass

    if unit_layout is not None:
        layout = unit_layout.scaled(I)
        storage_pts = constraints.storage_for(design)
        b_store = field_at([tuple(p) for p in storage_pts], unit_layout, disc)
        storage_b = tuple(float(np.linalg.norm(b)) * I for b in b_store)
        op: OperatingPoint = operating_point(I, env, layout, model)
    else:
        # thermal figures still follow from a bare pair of the same length
        from .geometry import antiparallel_pair

        layout = antiparallel_pair(design.width, design.depth, design.separation, design.length, I)
        storage_b = ()
        op = operating_point(I, env, layout, model)

    metrics = Metrics(
        design=design,
        gradient_per_amp=g_per_amp,
        dbz_dz_per_amp=dbz,
        gradient_at_current=g_per_amp * I,
        current_density=current_density(layout.wires[0], I),
        power=op.power,
        t_op=op.temperature,
        resistance=op.resistance,
        storage_b=storage_b,
        quadrupole=quad,
        residual_b=residual,
        return_gap=gap,
        converged=op.converged,
    )
    return replace(metrics, verdicts=check_constraints(metrics, constraints))


def gradient_per_amp(design: DesignPoint, disc: Discretization = DEFAULT_DISCRETIZATION) -> float:
    """Axial |B| gradient per ampere at the placed null."""
    layout, _ = design_layout(design, current=1.0, disc=disc)
    q = find_quadrupole(layout, box_around((0.0, design.ion_height, 0.0), 10e-6), disc)
    return float(q.gradient_per_amp[2])


def current_for_gradient(source, target: float) -> float:
    """Current [A] that produces an axial gradient ``target`` [T/m].

    ``source`` is a gradient per ampere [T/m/A], a :class:`Metrics` or a
    :class:`DesignPoint` (evaluated for its gradient).
    """
    if target < 0:
        raise ValueError("target must be non-negative")
    if isinstance(source, Metrics):
        g = source.gradient_per_amp
    elif isinstance(source, DesignPoint):
        g = gradient_per_amp(source)
    else:
        g = float(source)
    if not g > 0 or not math.isfinite(g):
        raise ValueError("design has no usable gradient per ampere")
    return target / g


# --- sweeps ------------------------------------------------------------------------


@dataclass(frozen=True)
class SweepRow:
    design: DesignPoint
    metrics: Metrics
    pareto: bool = False


@dataclass(frozen=True)
class SweepResult:
    rows: tuple[SweepRow, ...]

    @property
    def feasible(self) -> list[SweepRow]:
        return [r for r in self.rows if r.metrics.feasible]

    @property
    def front(self) -> list[SweepRow]:
        return [r for r in self.rows if r.pareto]

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        names = [v.name for v in self.rows[0].metrics.verdicts] if self.rows else []
        writer.writerow(
            ["width_m", "depth_m", "separation_m", "length_m", "current_A", "ion_height_m",
             "lead_length_m", "n_returns", "gradient_per_amp_T_per_m_A", "gradient_T_per_m",
             "current_density_A_per_cm2", "power_W", "t_op_K", "resistance_ohm",
             "storage_b_max_T", "return_gap_m"]
            + [f"ok_{n}" for n in names]
            + ["feasible", "pareto"]
        )
        for r in self.rows:
            m, d = r.metrics, r.design
            writer.writerow(
                [repr(v) for v in (d.width, d.depth, d.separation, d.length, d.current,
                                   d.ion_height, d.lead_length)]
                + [str(d.n_returns)]
                + [repr(float(v)) for v in (
                    m.gradient_per_amp, m.gradient_at_current, m.current_density, m.power,
                    m.t_op, m.resistance, max(m.storage_b) if m.storage_b else math.nan,
                    m.return_gap if m.return_gap is not None else math.nan)]
                + [str(int(v.passed)) for v in m.verdicts]
                + [str(int(m.feasible)), str(int(r.pareto))]
            )
        return buf.getvalue()

    def front_summary(self) -> dict:
        return {
            "n_points": len(self.rows),
            "n_feasible": len(self.feasible),
            "objectives": {"maximize": "gradient_T_per_m", "minimize": "power_W"},
            "front": [
                {
                    "design": asdict(r.design),
                    "gradient_T_per_m": r.metrics.gradient_at_current,
                    "power_W": r.metrics.power,
                    "t_op_K": r.metrics.t_op,
                    "current_density_A_per_cm2": r.metrics.current_density,
                }
                for r in self.front
            ],
        }


def dominates(a: Metrics, b: Metrics) -> bool:
    """``a`` is at least as good as ``b`` in gradient and power and strictly better in one."""
    ga, gb = a.gradient_at_current, b.gradient_at_current
    return ga >= gb and a.power <= b.power and (ga > gb or a.power < b.power)


def pareto_mask(metrics: Sequence[Metrics]) -> list[bool]:
    """Non-dominated feasible members (maximise gradient, minimise power)."""
    feas = [m.feasible for m in metrics]
    out = []
    for i, m in enumerate(metrics):
        if not feas[i]:
            out.append(False)
            continue
        out.append(not any(feas[j] and dominates(metrics[j], m)
                           for j in range(len(metrics)) if j != i))
    return out


def expand_ranges(ranges: Mapping[str, Sequence], base: DesignPoint | None = None) -> list[DesignPoint]:
    """Cartesian product of per-field value lists, sorted lexicographically by inputs."""
    base = base or reference_design(13.0)
    names = [f.name for f in fields(DesignPoint)]
    unknown = set(ranges) - set(names)
    if unknown:
        raise ValueError(f"unknown design fields {sorted(unknown)}")
    axes = [list(ranges[n]) if n in ranges else [getattr(base, n)] for n in names]
    if any(len(a) == 0 for a in axes):
        raise ValueError("empty range")
    designs = {DesignPoint(**dict(zip(names, combo))) for combo in itertools.product(*axes)}
    return sorted(designs, key=DesignPoint.key)


def _evaluate_job(args):
    return evaluate(*args)


def sweep(
    ranges: Mapping[str, Sequence],
    constraints: Constraints | None = None,
    env: ThermalEnvironment | None = None,
    model: ResistivityModel | None = None,
    base: DesignPoint | None = None,
    disc: Discretization = DEFAULT_DISCRETIZATION,
    max_workers: int | None = None,
) -> SweepResult:
    """Evaluate every design in the product of ``ranges`` and mark the Pareto front."""
    constraints = constraints or Constraints()
    env = env or ThermalEnvironment()
    model = model or ResistivityModel()
    designs = expand_ranges(ranges, base)
    jobs = [(d, env, model, constraints, disc) for d in designs]
    if max_workers and max_workers > 1:
        with ProcessPoolExecutor(max_workers=max_workers) as pool:
            metrics = list(pool.map(_evaluate_job, jobs))
    else:
        metrics = [_evaluate_job(j) for j in jobs]
    mask = pareto_mask(metrics)
    return SweepResult(tuple(SweepRow(d, m, p) for d, m, p in zip(designs, metrics, mask)))


def reassess(result: SweepResult, constraints: Constraints) -> SweepResult:
    """Re-apply different bounds to already evaluated metrics.

    Storage points are not re-evaluated, so only scalar bounds may change.
    """
    metrics = [replace(r.metrics, verdicts=check_constraints(r.metrics, constraints))
               for r in result.rows]
    mask = pareto_mask(metrics)
    return SweepResult(tuple(SweepRow(r.design, m, p) for r, m, p in zip(result.rows, metrics, mask)))
