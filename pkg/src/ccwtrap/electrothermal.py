"""Cryogenic copper resistance and lumped Joule-heating operating points.

Resistivity follows Matthiessen's rule,

    rho(T) = rho_pure(T) + rho_ref / RRR,

with ``rho_ref`` the total resistivity at 293 K, so that
RRR = rho(293 K) / rho_residual. ``rho_pure`` is the intrinsic (phonon)
resistivity of pure copper, interpolated log-linearly from an embedded
table (see ``docs/copper_table.md`` for provenance).
"""

from __future__ import annotations

import csv
import itertools
import math
import os
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np
from scipy.optimize import brentq, minimize_scalar

from .geometry import WireLayout, squares

T_REF = 293.0  # K, "room temperature" anchor

# Intrinsic resistivity of pure copper, 1e-8 ohm m. Values at 20, 40, 60,
# 80, 100, 150, 200, 273, 293 and 300 K are the Matula (1979) recommended
# values with the 0.002e-8 ohm m residual of the reference sample removed;
# the remaining points are Bloch-Grueneisen (theta_R = 343.5 K) values
# rescaled to pass through those anchors.
PURE_CU_T = np.array(
    [10, 15, 20, 25, 30, 35, 40, 45, 50, 55, 60, 65, 70, 75, 80, 90, 100, 125,
     150, 175, 200, 225, 250, 273, 293, 300], dtype=float)
PURE_CU_RHO = 1e-8 * np.array(
    [0.00002, 0.00017, 0.00080, 0.00242, 0.00588, 0.01212, 0.02190, 0.03510,
     0.05192, 0.07207, 0.09510, 0.12156, 0.15032, 0.18093, 0.21300, 0.27860,
     0.34600, 0.52248, 0.69700, 0.87222, 1.04400, 1.21609, 1.38610, 1.54100,
     1.67600, 1.72300])

TABLE_ENV_VAR = "CCWTRAP_COPPER_TABLE"


class TemperatureRangeError(ValueError):
    pass


class DegenerateInputError(ValueError):
    pass


def load_copper_table(path) -> tuple[np.ndarray, np.ndarray]:
    """Read a CSV with columns ``T_K`` and ``rho_ohm_m``."""
    temps, rhos = [], []
    with open(path, newline="", encoding="utf-8") as fh:
        for row in csv.DictReader(fh):
            temps.append(float(row["T_K"]))
            rhos.append(float(row["rho_ohm_m"]))
    return np.array(temps), np.array(rhos)


def default_table() -> tuple[np.ndarray, np.ndarray]:
    path = os.environ.get(TABLE_ENV_VAR)
    if path:
        return load_copper_table(path)
    return PURE_CU_T, PURE_CU_RHO


@dataclass(frozen=True)
class ResistivityModel:
    """Pure-copper table plus a residual term set by ``rrr``.

    ``rho_ref`` defaults to the self-consistent 293 K resistivity
    rho_pure(293) * rrr / (rrr - 1); pass it explicitly to anchor the model
    to a measured room-temperature value. ``rrr = inf`` gives pure copper.
    """

    rrr: float = 50.0
    rho_ref: float | None = None
    temperatures: np.ndarray = field(default=None, repr=False)
    rho_pure: np.ndarray = field(default=None, repr=False)

    def __post_init__(self):
        if self.temperatures is None or self.rho_pure is None:
            t, r = default_table()
            object.__setattr__(self, "temperatures", t)
            object.__setattr__(self, "rho_pure", r)
        t = np.asarray(self.temperatures, dtype=float)
        r = np.asarray(self.rho_pure, dtype=float)
        if not self.rrr > 1:
            raise ValueError("rrr must be > 1")
        if t.ndim != 1 or t.shape != r.shape or len(t) < 2:
            raise ValueError("resistivity table must be two equal-length 1-D arrays")
        if np.any(np.diff(t) <= 0):
            raise ValueError("table temperatures must be strictly increasing")
        if np.any(r <= 0) or np.any(np.diff(r) < 0):
            raise ValueError("table resistivity must be positive and non-decreasing")
        if t[0] > 10.0 or t[-1] < 300.0:
            raise ValueError("table must cover 10-300 K")
        t.flags.writeable = False
        r.flags.writeable = False
        object.__setattr__(self, "temperatures", t)
        object.__setattr__(self, "rho_pure", r)
        if self.rho_ref is None:
            ref = self.pure(T_REF)
            if math.isfinite(self.rrr):
                ref = ref * self.rrr / (self.rrr - 1)
            object.__setattr__(self, "rho_ref", float(ref))
        elif not self.rho_ref > 0:
            raise ValueError("rho_ref must be positive")

    @property
    def t_min(self) -> float:
        return float(self.temperatures[0])

    @property
    def t_max(self) -> float:
        return float(self.temperatures[-1])

    @property
    def residual(self) -> float:
        return 0.0 if math.isinf(self.rrr) else self.rho_ref / self.rrr

    def pure(self, t):
        t_arr = np.asarray(t, dtype=float)
        if np.any(t_arr < self.t_min) or np.any(t_arr > self.t_max):
            raise TemperatureRangeError(
                f"temperature {t} K outside table range [{self.t_min}, {self.t_max}] K"
            )
        out = np.exp(np.interp(t_arr, self.temperatures, np.log(self.rho_pure)))
        return float(out) if out.ndim == 0 else out

    def with_rrr(self, rrr: float) -> "ResistivityModel":
        return ResistivityModel(rrr, None, self.temperatures, self.rho_pure)

    def __hash__(self):
        return hash((self.rrr, self.rho_ref, self.temperatures.tobytes(), self.rho_pure.tobytes()))

    def __eq__(self, other):
        if not isinstance(other, ResistivityModel):
            return NotImplemented
        return (
            self.rrr == other.rrr
            and self.rho_ref == other.rho_ref
            and np.array_equal(self.temperatures, other.temperatures)
            and np.array_equal(self.rho_pure, other.rho_pure)
        )


@dataclass(frozen=True)
class ThermalEnvironment:
    t_base: float = 40.0  # K
    r_th: float = 5.0  # K/W

    def __post_init__(self):
        if self.t_base < 4.0:
            raise ValueError("t_base must be >= 4 K")
        if self.r_th < 0:
            raise ValueError("r_th must be >= 0")


@dataclass(frozen=True)
class OperatingPoint:
    current: float
    temperature: float
    resistance: float
    power: float
    converged: bool
    iterations: int


@dataclass(frozen=True)
class RrrFit:
    rrr_hat: float
    interval: tuple[float, float]
    residual_norm: float
    rho_ref: float
    residuals: tuple[float, ...]
    samples: tuple[tuple[float, float, float], ...]

    def model(self, base: ResistivityModel | None = None) -> ResistivityModel:
        """Resistivity model with the fitted RRR and the anchored rho_ref."""
        base = base or ResistivityModel()
        return ResistivityModel(self.rrr_hat, self.rho_ref, base.temperatures, base.rho_pure)

    def to_dict(self) -> dict:
        return {
            "rrr_hat": self.rrr_hat,
            "interval": list(self.interval),
            "residual_norm": self.residual_norm,
            "rho_ref_ohm_m": self.rho_ref,
            "samples": [
                {"T_K": t, "R_ohm": r, "R_err_ohm": e, "log_residual": res}
                for (t, r, e), res in zip(self.samples, self.residuals)
            ],
        }


def resistivity(t, model: ResistivityModel):
    """Total resistivity [ohm m] at temperature ``t`` [K]."""
    return model.pure(t) + model.residual


def sheet_resistance(t, thickness: float, model: ResistivityModel):
    """Sheet resistance [ohm/sq] of a film of ``thickness`` [m]."""
    if not thickness > 0:
        raise ValueError("thickness must be positive")
    return resistivity(t, model) / thickness


def geometry_factor(layout: WireLayout, thickness: float | None = None) -> float:
    """Sum of squares / thickness over all wires, so that R = factor * rho [1/m]."""
    total = 0.0
    for w in layout.wires:
        total += squares(w) / (thickness if thickness is not None else w.depth)
    return total


def layout_resistance(
    layout: WireLayout, t, model: ResistivityModel, thickness: float | None = None
):
    """Series resistance of all wires [ohm]; each wire's own depth unless ``thickness`` is given."""
    return geometry_factor(layout, thickness) * resistivity(t, model)


def operating_point(
    current: float,
    env: ThermalEnvironment,
    layout: WireLayout,
    model: ResistivityModel,
    t_init: float | None = None,
    damping: float = 0.5,
    tol: float = 1e-3,
    max_iter: int = 1000,
) -> OperatingPoint:
    """Self-consistent T = t_base + r_th * I^2 * R(T) by damped fixed-point iteration.

    Leaving the resistivity table is reported as non-convergence (the
    thermal-runaway signature), never raised. ``tol`` bounds the residual
    |T - t_base - r_th I^2 R(T)|; iteration continues to ``tol * 1e-3`` when
    the cap allows so that results do not depend on the starting guess.
    """
    if current < 0:
        raise ValueError("current must be non-negative")
    if not 0 < damping <= 1:
        raise ValueError("damping must be in (0, 1]")
    g = geometry_factor(layout)
    i2 = current * current
    T = env.t_base if t_init is None else float(t_init)

    def target(temp):
        return env.t_base + env.r_th * i2 * g * resistivity(temp, model)

    last_ok, last_res = None, math.inf
    for it in range(1, max_iter + 1):
        try:
            f = target(T)
        except TemperatureRangeError:
            break
        last_ok, last_res = T, abs(f - T)
        if last_res < tol * 1e-3:
            break
        T = (1 - damping) * T + damping * f
    else:
        it = max_iter
    if last_ok is None:
        T_last = min(max(T, model.t_min), model.t_max)
        R = g * resistivity(T_last, model)
        return OperatingPoint(current, T_last, R, i2 * R, False, it)
    R = g * resistivity(last_ok, model)
    return OperatingPoint(current, last_ok, R, i2 * R, last_res < tol, it)


@dataclass(frozen=True)
class PowerCurvePoint:
    current: float
    p_selfheated: float
    p_isothermal: float
    converged: bool
    temperature: float

    @property
    def ratio(self) -> float:
        return self.p_selfheated / self.p_isothermal if self.p_isothermal > 0 else math.nan


def power_curve(
    currents: Sequence[float],
    env: ThermalEnvironment,
    layout: WireLayout,
    model: ResistivityModel,
) -> list[PowerCurvePoint]:
    """Self-heated and isothermal (T = t_base) dissipation per current."""
    cur = list(currents)
    if any(c < 0 for c in cur) or any(b < a for a, b in zip(cur, cur[1:])):
        raise ValueError("currents must be non-negative and ascending")
    r_base = layout_resistance(layout, env.t_base, model)
    out = []
    for c in cur:
        op = operating_point(c, env, layout, model)
        out.append(PowerCurvePoint(c, op.power, c * c * r_base, op.converged, op.temperature))
    return out


def runaway_current(
    env: ThermalEnvironment,
    layout: WireLayout,
    model: ResistivityModel,
    i_max_search: float,
    resolution: float = 0.01,
) -> float | None:
    """Largest current in [0, i_max_search] with a converged operating point.

    Returns ``None`` when the operating point still converges at
    ``i_max_search`` (no runaway below the bound).
    """
    if not i_max_search > 0:
        raise ValueError("i_max_search must be positive")
    if operating_point(i_max_search, env, layout, model).converged:
        return None
    lo, hi = 0.0, float(i_max_search)
    while hi - lo > resolution:
        mid = 0.5 * (lo + hi)
        if operating_point(mid, env, layout, model).converged:
            lo = mid
        else:
            hi = mid
    return lo


def fit_thermal_resistance(
    current: float,
    measured_power: float,
    t_base: float,
    layout: WireLayout,
    model: ResistivityModel,
    r_max: float = 100.0,
) -> float:
    """Thermal resistance [K/W] that reproduces ``measured_power`` at ``current``."""

    def mismatch(r_th):
        op = operating_point(current, ThermalEnvironment(t_base, r_th), layout, model)
        return (op.power if op.converged else math.inf) - measured_power

    if mismatch(0.0) > 0:
        raise ValueError("measured power below the isothermal dissipation at t_base")
    hi = 1.0
    while mismatch(hi) < 0:
        hi *= 2
        if hi > r_max:
            raise ValueError("no thermal resistance below r_max reproduces the power")
    return brentq(mismatch, 0.0, hi, xtol=1e-9)


# --- RRR fitting ------------------------------------------------------------------


def read_rt_csv(path) -> list[tuple[float, float, float]]:
    """R(T) samples from CSV columns T_K, R_ohm and optional R_err_ohm."""
    out = []
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or not {"T_K", "R_ohm"} <= set(reader.fieldnames):
            raise DegenerateInputError("R(T) CSV needs columns T_K and R_ohm")
        for row in reader:
            err = row.get("R_err_ohm") or "0"
            out.append((float(row["T_K"]), float(row["R_ohm"]), float(err)))
    return out


def _normalise_samples(samples) -> list[tuple[float, float, float]]:
    out = []
    for s in samples:
        if len(s) == 2:
            t, r = s
            e = 0.0
        else:
            t, r, e = s
        out.append((float(t), float(r), abs(float(e))))
    return out


def synthesize_rt(
    model: ResistivityModel, temperatures: Iterable[float], layout_squares: float, thickness: float
) -> list[tuple[float, float, float]]:
    """Noise-free R(T) samples for a film with the given geometry."""
    g = layout_squares / thickness
    return [(float(t), g * resistivity(t, model), 0.0) for t in temperatures]


def _fit_once(samples, g, base: ResistivityModel, anchor: int, bounds) -> tuple[float, float]:
    rho_ref = samples[anchor][1] / g
    temps = np.array([s[0] for s in samples])
    log_r = np.log([s[1] for s in samples])
    pure = base.pure(temps)

    def cost(log_rrr):
        model_r = g * (pure + rho_ref / math.exp(log_rrr))
        return float(np.sum((np.log(model_r) - log_r) ** 2))

    res = minimize_scalar(
        cost, bounds=(math.log(bounds[0]), math.log(bounds[1])), method="bounded",
        options={"xatol": 1e-10},
    )
    return math.exp(res.x), rho_ref


def fit_rrr(
    samples,
    layout_squares: float,
    thickness: float,
    base: ResistivityModel | None = None,
    anchor_window: float = 10.0,
    bounds: tuple[float, float] = (1.001, 1e6),
) -> RrrFit:
    """Least-squares fit of log R(T) over RRR with the geometry held fixed.

    The sample closest to 293 K (within ``anchor_window``) fixes rho_ref =
    R * thickness / squares. The interval comes from refitting at every
    combination of sample values shifted by +-their uncertainty.
    """
    base = base or ResistivityModel()
    pts = _normalise_samples(samples)
    if len(pts) < 2:
        raise DegenerateInputError("need at least 2 samples")
    temps = [p[0] for p in pts]
    if len(set(temps)) != len(temps):
        raise DegenerateInputError("duplicate sample temperatures")
    if any(p[1] <= 0 for p in pts):
        raise DegenerateInputError("resistances must be positive")
    if not (layout_squares > 0 and thickness > 0):
        raise DegenerateInputError("squares and thickness must be positive")
    anchor = min(range(len(pts)), key=lambda i: abs(pts[i][0] - T_REF))
    if abs(pts[anchor][0] - T_REF) > anchor_window:
        raise DegenerateInputError(f"no sample within {anchor_window} K of {T_REF} K")
    for t in temps:
        base.pure(t)  # range check
    g = layout_squares / thickness

    rrr_hat, rho_ref = _fit_once(pts, g, base, anchor, bounds)
    fits = [rrr_hat]
    for signs in itertools.product((-1.0, 1.0), repeat=len(pts)):
        shifted = [(t, r + s * e, e) for (t, r, e), s in zip(pts, signs)]
        if any(r <= 0 for _, r, _ in shifted):
            continue
        fits.append(_fit_once(shifted, g, base, anchor, bounds)[0])

    model_r = g * (base.pure(np.array(temps)) + rho_ref / rrr_hat)
    residuals = tuple(float(v) for v in np.log(model_r) - np.log([p[1] for p in pts]))
    return RrrFit(
        rrr_hat=rrr_hat,
        interval=(min(fits), max(fits)),
        residual_norm=float(np.linalg.norm(residuals)),
        rho_ref=rho_ref,
        residuals=residuals,
        samples=tuple(pts),
    )
