"""``ccwtrap`` command-line interface.

One subcommand per core operation. Physical quantities carry unit suffixes
(``100um``, ``13A``, ``5K_per_W``); bare numbers are rejected. Data files
are written atomically and hold no timestamps; run metadata goes to a
``<out>.meta.json`` sidecar.

Exit status: 0 success, 2 input error, 3 solver non-convergence,
4 constraint check failed.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import platform
import sys
import tempfile
import time
from dataclasses import asdict
from importlib import resources
from pathlib import Path

import numpy as np

from . import __version__
from .design import (
    Constraints,
    DesignPoint,
    NullPlacementError,
    REFERENCE_LEAD_LENGTH,
    current_for_gradient,
    evaluate,
    reconstructed_layout,
    sweep,
)
from .electrothermal import (
    TABLE_ENV_VAR,
    DegenerateInputError,
    ResistivityModel,
    TemperatureRangeError,
    ThermalEnvironment,
    fit_rrr,
    fit_thermal_resistance,
    layout_resistance,
    load_copper_table,
    operating_point,
    power_curve,
    read_rt_csv,
    runaway_current,
    sheet_resistance,
)
from .geometry import LayoutError, load_layout, parse_layout, serialize_layout, squares
from .magnetostatics import (
    ConductorIntersectionError,
    Discretization,
    NotBracketedError,
    SingularityError,
    box_around,
    field_map,
    find_quadrupole,
    gradient,
)
from .units import UnitError, describe, parse_list, parse_quantity

EXIT_OK = 0
EXIT_INPUT = 2
EXIT_NONCONVERGED = 3
EXIT_CONSTRAINT = 4

BUILTIN_PREFIX = "builtin:"


class InputError(Exception):
    pass


class NonConvergence(Exception):
    pass


# --- argument helpers ------------------------------------------------------------


def _q(dimension: str):
    def conv(text):
        try:
            return parse_quantity(text, dimension)
        except UnitError as exc:
            raise argparse.ArgumentTypeError(str(exc)) from None

    conv.__name__ = dimension
    return conv


def _qlist(dimension: str):
    def conv(text):
        try:
            return parse_list(text, dimension)
        except UnitError as exc:
            raise argparse.ArgumentTypeError(str(exc)) from None

    conv.__name__ = f"{dimension} list"
    return conv


def _positive_int(text):
    try:
        v = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"{text!r} is not an integer") from None
    if v < 1:
        raise argparse.ArgumentTypeError("must be >= 1")
    return v


def _rrr(text):
    try:
        v = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"{text!r} is not a number") from None
    if not v > 1:
        raise argparse.ArgumentTypeError("RRR must be > 1")
    return v


def _u(dimension: str) -> str:
    return f"[{describe(dimension)}]"


def builtin_layouts() -> list[str]:
    files = resources.files("ccwtrap").joinpath("data")
    return sorted(p.name[:-5] for p in files.iterdir() if p.name.endswith(".json"))


def read_layout(source: str):
    """Layout from a file path or ``builtin:NAME``."""
    try:
        if source.startswith(BUILTIN_PREFIX):
            name = source[len(BUILTIN_PREFIX):]
            res = resources.files("ccwtrap").joinpath("data", f"{name}.json")
            if not res.is_file():
                raise InputError(
                    f"unknown builtin layout {name!r}; available: {', '.join(builtin_layouts())}"
                )
            return parse_layout(res.read_text(encoding="utf-8"))
        return load_layout(source)
    except OSError as exc:
        raise InputError(f"cannot read layout {source!r}: {exc.strerror or exc}") from None


def _model(args) -> ResistivityModel:
    kwargs = {}
    if getattr(args, "copper_table", None):
        try:
            t, r = load_copper_table(args.copper_table)
        except (OSError, KeyError, ValueError) as exc:
            raise InputError(f"cannot read copper table {args.copper_table!r}: {exc}") from None
        kwargs.update(temperatures=t, rho_pure=r)
    return ResistivityModel(args.rrr, getattr(args, "rho_ref", None), **kwargs)


def _env(args) -> ThermalEnvironment:
    return ThermalEnvironment(args.t_base, args.r_th)


def _disc(args) -> Discretization:
    return Discretization(args.n_w, args.n_d)


def _add_model(p):
    g = p.add_argument_group("copper model")
    g.add_argument("--rrr", type=_rrr, default=50.0,
                   help="residual resistance ratio rho(293 K)/rho_residual, dimensionless (default 50)")
    g.add_argument("--rho-ref", type=_q("resistivity"), default=None,
                   help=f"resistivity at 293 K {_u('resistivity')} (default: self-consistent with the table)")
    g.add_argument("--copper-table", default=os.environ.get(TABLE_ENV_VAR),
                   help=f"CSV with columns T_K,rho_ohm_m replacing the built-in pure-copper table "
                        f"(default: ${TABLE_ENV_VAR} if set)")


def _add_env(p, t_base="40K", r_th="5K_per_W"):
    g = p.add_argument_group("thermal environment")
    g.add_argument("--t-base", type=_q("temperature"), default=parse_quantity(t_base, "temperature"),
                   help=f"heat-sink base temperature {_u('temperature')} (default {t_base})")
    g.add_argument("--r-th", type=_q("thermal_resistance"),
                   default=parse_quantity(r_th, "thermal_resistance"),
                   help=f"chip-to-sink thermal resistance {_u('thermal_resistance')} (default {r_th})")


def _add_disc(p):
    g = p.add_argument_group("discretization")
    g.add_argument("--n-w", type=_positive_int, default=4, help="filaments across the width, count (default 4)")
    g.add_argument("--n-d", type=_positive_int, default=2, help="filaments through the depth, count (default 2)")


def _add_out(p, kind):
    p.add_argument("--out", "-o", default=None,
                   help=f"output {kind} path (default: stdout); run metadata goes to <out>.meta.json")
    p.add_argument("--echo-units", action="store_true",
                   help="print every parsed quantity in SI units to stderr")


def _add_design(p, multi=False):
    conv = _qlist if multi else _q
    g = p.add_argument_group("design" + (" ranges (comma-separated lists)" if multi else ""))
    g.add_argument("--width", type=conv("length"), default=None, help=f"wire width {_u('length')} (default 100um)")
    g.add_argument("--depth", type=conv("length"), default=None, help=f"wire depth {_u('length')} (default 15um)")
    g.add_argument("--separation", type=conv("length"), default=None,
                   help=f"edge-to-edge gap of the pair {_u('length')} (default 88um)")
    g.add_argument("--length", type=conv("length"), default=None,
                   help=f"gate-section length {_u('length')} (default 4mm)")
    g.add_argument("--current", type=conv("current"), default=None, help=f"drive current {_u('current')} (default 13A)")
    g.add_argument("--ion-height", type=conv("length"), default=None,
                   help=f"ion height above the surface {_u('length')} (default 125um)")
    g.add_argument("--lead-length", type=conv("length"), default=None,
                   help=f"lead length from pair to pad line {_u('length')} (default {REFERENCE_LEAD_LENGTH * 1e3:g}mm)")


def _add_constraints(p):
    g = p.add_argument_group("constraints (closed bounds)")
    g.add_argument("--j-max", type=_q("current_density"), default=1e6,
                   help=f"current-density cap {_u('current_density')} (default 1e6A_per_cm2)")
    g.add_argument("--gradient-min", type=_q("gradient"), default=100.0,
                   help=f"lower end of the gradient target band {_u('gradient')} (default 100T_per_m)")
    g.add_argument("--gradient-max", type=_q("gradient"), default=150.0,
                   help=f"upper end of the gradient target band {_u('gradient')} (default 150T_per_m)")
    g.add_argument("--power-budget", type=_q("power"), default=math.inf,
                   help=f"dissipation limit {_u('power')} (default none)")
    g.add_argument("--t-op-max", type=_q("temperature"), default=math.inf,
                   help=f"operating-temperature limit {_u('temperature')} (default none)")
    g.add_argument("--storage-b-max", type=_q("field"), default=2e-3,
                   help=f"field limit at the storage points {_u('field')} (default 2mT)")
    g.add_argument("--storage-offset", type=_q("length"), default=5e-3,
                   help=f"storage points at z = +-offset on the ion-height axis {_u('length')} (default 5mm)")


_DESIGN_DEFAULTS = dict(width=100e-6, depth=15e-6, separation=88e-6, length=4e-3, current=13.0,
                        ion_height=125e-6, lead_length=REFERENCE_LEAD_LENGTH)


def _constraints(args, ion_height_values) -> Constraints:
    from .geometry import Point3

    pts = None
    if args.storage_offset != 5e-3 or any(h != 125e-6 for h in ion_height_values):
        if len(set(ion_height_values)) > 1:
            pts = None  # per-design default handles several heights
        else:
            h = ion_height_values[0]
            pts = (Point3(0.0, h, args.storage_offset), Point3(0.0, h, -args.storage_offset))
    return Constraints(
        j_max=args.j_max,
        gradient_target=(args.gradient_min, args.gradient_max),
        power_budget=args.power_budget,
        t_op_max=args.t_op_max,
        storage_b_max=args.storage_b_max,
        storage_points=pts,
    )


# --- output ------------------------------------------------------------------------


def _clean(obj):
    """JSON-safe copy: non-finite floats become null, numpy scalars become Python."""
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _clean(obj.tolist())
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if math.isfinite(v) else None
    if isinstance(obj, np.integer):
        return int(obj)
    return obj


def dumps(doc) -> str:
    return json.dumps(_clean(doc), indent=2, sort_keys=True, allow_nan=False) + "\n"


def atomic_write(path: str | os.PathLike, text: str) -> None:
    """Write via a temporary file in the target directory and rename, so no partial file appears."""
    path = Path(path)
    directory = path.parent if str(path.parent) else Path(".")
    if not directory.is_dir():
        raise InputError(f"output directory {str(directory)!r} does not exist")
    fd, tmp = tempfile.mkstemp(prefix=f".{path.name}.", suffix=".tmp", dir=directory)
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


class _Run:
    """Collects outputs of one command and writes them at the end."""

    def __init__(self, args, argv):
        self.args = args
        self.argv = argv
        self.t0 = time.perf_counter()
        self.files: list[tuple[str | None, str]] = []
        self.summary = ""

    def emit(self, text: str, path: str | None = None):
        self.files.append((path if path is not None else self.args.out, text))

    def finish(self, status: int):
        for path, text in self.files:
            if path is None:
                sys.stdout.write(text)
            else:
                atomic_write(path, text)
        main_out = self.args.out
        if main_out is not None:
            meta = {
                "command": self.args.command,
                "argv": list(self.argv),
                "version": __version__,
                "python": platform.python_version(),
                "numpy": np.__version__,
                "started_unix": time.time(),
                "elapsed_s": time.perf_counter() - self.t0,
                "exit_status": status,
                "outputs": [p for p, _ in self.files if p is not None],
            }
            atomic_write(f"{main_out}.meta.json", dumps(meta))
        if self.summary:
            print(self.summary, file=sys.stderr if main_out is None else sys.stdout)


# --- commands ----------------------------------------------------------------------


def cmd_field_map(args, run):
    layout = read_layout(args.layout)
    n_x, n_z = args.nx, args.nz
    x = np.linspace(-args.x_half, args.x_half, n_x) if n_x > 1 else np.array([0.0])
    z = np.linspace(-args.z_half, args.z_half, n_z) if n_z > 1 else np.array([0.0])
    fmap = field_map(layout, x, np.array([args.height]), z, disc=_disc(args))
    run.emit(fmap.to_csv() if args.format == "csv" else fmap.to_json())
    mag = fmap.magnitude
    i = np.unravel_index(int(np.argmin(mag)), mag.shape)
    run.summary = (f"field map: {mag.size} points at y = {args.height:g} m, "
                   f"min |B| = {mag[i]:.4g} T at x = {x[i[0]]:.4g} m, z = {z[i[2]]:.4g} m")
    return EXIT_OK


def cmd_quadrupole(args, run):
    layout = read_layout(args.layout)
    center = (args.x, args.y, args.z)
    try:
        q = find_quadrupole(layout, box_around(center, args.half), _disc(args), pitch=args.pitch)
    except NotBracketedError as exc:
        raise NonConvergence(str(exc)) from None
    doc = {
        "position_m": list(q.position),
        "residual_B_T": q.residual_B,
        "gradient_per_amp_T_per_m_A": q.gradient_per_amp.tolist(),
        "dBz_dz_per_amp_T_per_m_A": q.axial_gradient_per_amp,
        "jacobian_per_amp_T_per_m_A": q.jacobian_per_amp.tolist(),
        "drive_current_A": layout.drive_current,
        "iterations": q.iterations,
    }
    run.emit(dumps(doc))
    p = q.position
    run.summary = (f"quadrupole at ({p.x:.3g}, {p.y:.6g}, {p.z:.3g}) m, "
                   f"axial gradient {q.gradient_per_amp[2]:.4g} T/m/A")
    return EXIT_OK


def cmd_gradient(args, run):
    from .geometry import Point3

    layout = read_layout(args.layout)
    res = gradient(Point3(args.x, args.y, args.z), layout, _disc(args), step=args.step)
    doc = {
        "point_m": list(res.point),
        "B_T": [res.field.Bx, res.field.By, res.field.Bz],
        "B_abs_T": res.field.magnitude,
        "jacobian_T_per_m": res.jacobian.tolist(),
        "grad_abs_B_T_per_m": res.grad_mag.tolist(),
        "axis_gradient_T_per_m": res.axis_gradient.tolist(),
        "divergence_T_per_m": res.divergence,
        "step_m": args.step,
    }
    run.emit(dumps(doc))
    run.summary = f"|B| = {res.field.magnitude:.4g} T, axis gradients {np.round(res.axis_gradient, 4).tolist()} T/m"
    return EXIT_OK


def cmd_resistance(args, run):
    layout = read_layout(args.layout)
    model = _model(args)
    temps = args.temperature or [293.0]
    n_sq = sum(squares(w) for w in layout.wires)
    rows = []
    for t in temps:
        rows.append({
            "T_K": t,
            "R_ohm": layout_resistance(layout, t, model, args.thickness),
            "sheet_resistance_ohm_per_sq": sheet_resistance(
                t, args.thickness if args.thickness else layout.wires[0].depth, model),
        })
    doc = {"squares": n_sq, "rrr": model.rrr, "rho_ref_ohm_m": model.rho_ref, "points": rows}
    run.emit(dumps(doc))
    run.summary = f"{n_sq:.6g} squares; " + ", ".join(
        f"R({r['T_K']:g} K) = {r['R_ohm'] * 1e3:.4g} mOhm" for r in rows)
    return EXIT_OK


def cmd_operating_point(args, run):
    layout = read_layout(args.layout)
    op = operating_point(args.current, _env(args), layout, _model(args),
                         damping=args.damping, tol=args.tol, max_iter=args.max_iter)
    run.emit(dumps(asdict(op)))
    run.summary = (f"I = {op.current:g} A: T = {op.temperature:.4f} K, R = {op.resistance * 1e3:.4g} mOhm, "
                   f"P = {op.power:.4g} W, converged = {op.converged}")
    return EXIT_OK if op.converged else EXIT_NONCONVERGED


def cmd_power_curve(args, run):
    layout = read_layout(args.layout)
    pts = power_curve(args.currents, _env(args), layout, _model(args))
    lines = ["I_A,P_selfheated_W,P_isothermal_W,ratio,T_K,converged"]
    for p in pts:
        lines.append(",".join([repr(p.current), repr(p.p_selfheated), repr(p.p_isothermal),
                               repr(p.ratio), repr(p.temperature), str(int(p.converged))]))
    run.emit("\n".join(lines) + "\n")
    bad = sum(not p.converged for p in pts)
    run.summary = f"{len(pts)} currents, {bad} without a converged operating point"
    return EXIT_OK


def cmd_runaway(args, run):
    layout = read_layout(args.layout)
    i_run = runaway_current(_env(args), layout, _model(args), args.i_max, args.resolution)
    doc = {"runaway_current_A": i_run, "none_below_bound": i_run is None,
           "i_max_search_A": args.i_max, "resolution_A": args.resolution}
    run.emit(dumps(doc))
    run.summary = ("no runaway below {:g} A".format(args.i_max) if i_run is None
                   else f"largest converged current {i_run:.2f} A")
    return EXIT_OK


def cmd_fit_rrr(args, run):
    try:
        samples = read_rt_csv(args.samples)
    except OSError as exc:
        raise InputError(f"cannot read {args.samples!r}: {exc.strerror or exc}") from None
    except ValueError as exc:
        raise InputError(f"malformed R(T) CSV: {exc}") from None
    base = _model(args)
    fit = fit_rrr(samples, args.squares, args.thickness, base=base)
    doc = fit.to_dict()
    summary = f"RRR = {fit.rrr_hat:.4g} [{fit.interval[0]:.4g}, {fit.interval[1]:.4g}]"
    if args.heating_current is not None:
        if args.measured_power is None:
            raise InputError("--heating-current needs --measured-power")
        from .geometry import WirePath, CrossSection, Point3, WireLayout

        strip = WireLayout((WirePath(
            (Point3(0, 0, 0), Point3(args.squares * 1e-4, 0, 0)), CrossSection(1e-4, args.thickness), 1.0),))
        model = fit.model(base)
        r_th = fit_thermal_resistance(args.heating_current, args.measured_power, args.t_base, strip, model)
        env = ThermalEnvironment(args.t_base, r_th)
        pc = power_curve([args.heating_current], env, strip, model)[0]
        doc["thermal"] = {
            "t_base_K": args.t_base,
            "r_th_K_per_W": r_th,
            "current_A": args.heating_current,
            "measured_power_W": args.measured_power,
            "p_isothermal_W": pc.p_isothermal,
            "self_heating_ratio": pc.ratio,
            "t_op_K": pc.temperature,
        }
        summary += f"; r_th = {r_th:.4g} K/W, self-heating ratio {pc.ratio:.3f}"
    run.emit(dumps(doc))
    run.summary = summary
    return EXIT_OK


def _single_design(args) -> DesignPoint:
    vals = {k: (getattr(args, k) if getattr(args, k) is not None else v) for k, v in _DESIGN_DEFAULTS.items()}
    return DesignPoint(**vals)


def _metrics_doc(m, target=None):
    doc = {
        "design": asdict(m.design),
        "gradient_per_amp_T_per_m_A": m.gradient_per_amp,
        "dBz_dz_per_amp_T_per_m_A": m.dbz_dz_per_amp,
        "gradient_T_per_m": m.gradient_at_current,
        "current_density_A_per_cm2": m.current_density,
        "power_W": m.power,
        "t_op_K": m.t_op,
        "resistance_ohm": m.resistance,
        "storage_B_T": list(m.storage_b),
        "quadrupole_m": list(m.quadrupole) if m.quadrupole is not None else None,
        "return_gap_m": m.return_gap,
        "operating_point_converged": m.converged,
        "verdicts": [{"name": v.name, "passed": v.passed, "value": v.value,
                      "bound": list(v.bound) if isinstance(v.bound, tuple) else v.bound}
                     for v in m.verdicts],
        "feasible": m.feasible,
    }
    if target is not None and m.gradient_per_amp > 0:
        doc["current_for_target_A"] = current_for_gradient(m, target)
        doc["target_T_per_m"] = target
    return doc


def cmd_evaluate(args, run):
    design = _single_design(args)
    cons = _constraints(args, [design.ion_height])
    m = evaluate(design, _env(args), _model(args), cons, _disc(args))
    run.emit(dumps(_metrics_doc(m, args.target)))
    failed = [v.name for v in m.verdicts if not v.passed]
    run.summary = (f"gradient {m.gradient_at_current:.4g} T/m ({m.gradient_per_amp:.4g} T/m/A), "
                   f"P = {m.power:.4g} W, T = {m.t_op:.4g} K; "
                   + ("feasible" if not failed else "failed: " + ", ".join(failed)))
    return EXIT_OK if m.feasible else EXIT_CONSTRAINT


def cmd_current_for_gradient(args, run):
    if args.gradient_per_amp is not None:
        g = args.gradient_per_amp
        src = "given"
    else:
        design = _single_design(args)
        from .design import gradient_per_amp

        try:
            g = gradient_per_amp(design, _disc(args))
        except (NullPlacementError, NotBracketedError) as exc:
            raise NonConvergence(str(exc)) from None
        src = "simulated"
    i = current_for_gradient(g, args.target)
    run.emit(dumps({"target_T_per_m": args.target, "gradient_per_amp_T_per_m_A": g,
                    "gradient_source": src, "current_A": i}))
    run.summary = f"{args.target:g} T/m needs {i:.4g} A at {g:.4g} T/m/A ({src})"
    return EXIT_OK


def cmd_sweep(args, run):
    ranges = {k: getattr(args, k) for k in _DESIGN_DEFAULTS if getattr(args, k) is not None}
    base = DesignPoint(**_DESIGN_DEFAULTS)
    heights = ranges.get("ion_height", [base.ion_height])
    cons = _constraints(args, list(heights))
    result = sweep(ranges, cons, _env(args), _model(args), base=base, disc=_disc(args),
                   max_workers=args.workers)
    run.emit(result.to_csv())
    front_path = args.front_out
    if front_path is None and args.out is not None:
        front_path = f"{args.out}.front.json"
    if front_path is not None:
        run.emit(dumps(result.front_summary()), front_path)
    run.summary = (f"{len(result.rows)} designs, {len(result.feasible)} feasible, "
                   f"{len(result.front)} on the Pareto front")
    return EXIT_OK


def cmd_reconstruct(args, run):
    layout = reconstructed_layout(args.current)
    run.emit(serialize_layout(layout, args.unit))
    n_sq = sum(squares(w) for w in layout.wires)
    run.summary = f"reconstructed routed layout: {len(layout.wires)} wires, {n_sq:.4f} squares"
    return EXIT_OK


# --- parser --------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ccwtrap",
        description="Fields, electro-thermal operating points and design sweeps for "
                    "current-carrying wires beneath surface ion traps.",
        epilog="Units: every physical quantity needs a suffix, e.g. 100um, 13A, 40K, 5K_per_W, "
               "150T_per_m, 2mT, 1028mW. Layouts are JSON files or builtin:NAME. "
               "Exit status: 0 ok, 2 input error, 3 non-convergence, 4 constraint failure.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, metavar="COMMAND")

    def add(name, func, help_text, out_kind="JSON"):
        p = sub.add_parser(name, help=help_text, description=help_text)
        p.set_defaults(func=func)
        _add_out(p, out_kind)
        return p

    layout_help = "layout JSON file or builtin:NAME"

    p = add("field-map", cmd_field_map, "sample B on a horizontal plane and write x,y,z,Bx,By,Bz,B_abs", "CSV/JSON")
    p.add_argument("layout", help=layout_help)
    p.add_argument("--height", type=_q("length"), default=125e-6, help=f"plane height y {_u('length')} (default 125um)")
    p.add_argument("--x-half", type=_q("length"), default=200e-6, help=f"half extent along x {_u('length')} (default 200um)")
    p.add_argument("--z-half", type=_q("length"), default=200e-6, help=f"half extent along z {_u('length')} (default 200um)")
    p.add_argument("--nx", type=_positive_int, default=101, help="samples along x, count (default 101)")
    p.add_argument("--nz", type=_positive_int, default=101, help="samples along z, count (default 101)")
    p.add_argument("--format", choices=("csv", "json"), default="csv", help="output format (default csv)")
    _add_disc(p)

    p = add("quadrupole", cmd_quadrupole, "locate the |B| minimum in a box and report gradients per ampere")
    p.add_argument("layout", help=layout_help)
    p.add_argument("--x", type=_q("length"), default=0.0, help=f"box centre x {_u('length')} (default 0m)")
    p.add_argument("--y", type=_q("length"), default=125e-6, help=f"box centre y {_u('length')} (default 125um)")
    p.add_argument("--z", type=_q("length"), default=0.0, help=f"box centre z {_u('length')} (default 0m)")
    p.add_argument("--half", type=_q("length"), default=30e-6, help=f"box half size {_u('length')} (default 30um)")
    p.add_argument("--pitch", type=_q("length"), default=2e-6, help=f"scan pitch {_u('length')} (default 2um)")
    _add_disc(p)

    p = add("gradient", cmd_gradient, "field, Jacobian and grad|B| at a point")
    p.add_argument("layout", help=layout_help)
    p.add_argument("--x", type=_q("length"), default=0.0, help=f"point x {_u('length')} (default 0m)")
    p.add_argument("--y", type=_q("length"), default=125e-6, help=f"point y {_u('length')} (default 125um)")
    p.add_argument("--z", type=_q("length"), default=0.0, help=f"point z {_u('length')} (default 0m)")
    p.add_argument("--step", type=_q("length"), default=1e-7, help=f"finite-difference step {_u('length')} (default 0.1um)")
    _add_disc(p)

    p = add("resistance", cmd_resistance, "series resistance and sheet resistance of a layout")
    p.add_argument("layout", help=layout_help)
    p.add_argument("--temperature", "-T", type=_q("temperature"), action="append",
                   help=f"temperature, repeatable {_u('temperature')} (default 293K)")
    p.add_argument("--thickness", type=_q("length"), default=None,
                   help=f"film thickness for all wires {_u('length')} (default: each wire's depth)")
    _add_model(p)

    p = add("operating-point", cmd_operating_point, "self-consistent Joule-heating temperature and power")
    p.add_argument("layout", help=layout_help)
    p.add_argument("--current", type=_q("current"), required=True, help=f"drive current {_u('current')}")
    p.add_argument("--damping", type=float, default=0.5, help="fixed-point damping, dimensionless (default 0.5)")
    p.add_argument("--tol", type=_q("temperature"), default=1e-3, help=f"temperature tolerance {_u('temperature')} (default 0.001K)")
    p.add_argument("--max-iter", type=_positive_int, default=1000, help="iteration cap, count (default 1000)")
    _add_env(p)
    _add_model(p)

    p = add("power-curve", cmd_power_curve, "self-heated vs isothermal dissipation over currents", "CSV")
    p.add_argument("layout", help=layout_help)
    p.add_argument("--currents", type=_qlist("current"), required=True,
                   help=f"ascending comma-separated currents {_u('current')}, e.g. 1A,2A,5A")
    _add_env(p)
    _add_model(p)

    p = add("runaway", cmd_runaway, "largest current with a converged operating point")
    p.add_argument("layout", help=layout_help)
    p.add_argument("--i-max", type=_q("current"), required=True, help=f"upper search bound {_u('current')}")
    p.add_argument("--resolution", type=_q("current"), default=0.01, help=f"bisection resolution {_u('current')} (default 0.01A)")
    _add_env(p)
    _add_model(p)

    p = add("fit-rrr", cmd_fit_rrr, "fit RRR to R(T) samples (CSV columns T_K,R_ohm[,R_err_ohm])")
    p.add_argument("samples", help="R(T) CSV file")
    p.add_argument("--squares", type=float, default=390.0, help="sheet squares of the measured structure, dimensionless (default 390)")
    p.add_argument("--thickness", type=_q("length"), default=15e-6, help=f"film thickness {_u('length')} (default 15um)")
    p.add_argument("--heating-current", type=_q("current"), default=None,
                   help=f"also fit r_th from the dissipation at this current {_u('current')}")
    p.add_argument("--measured-power", type=_q("power"), default=None,
                   help=f"dissipation measured at --heating-current {_u('power')}")
    p.add_argument("--t-base", type=_q("temperature"), default=38.0,
                   help=f"base temperature of the heating measurement {_u('temperature')} (default 38K)")
    _add_model(p)

    p = add("evaluate", cmd_evaluate, "metrics and constraint verdicts for one design (exit 4 if infeasible)")
    _add_design(p)
    p.add_argument("--target", type=_q("gradient"), default=None,
                   help=f"also report the current needed for this gradient {_u('gradient')}")
    _add_constraints(p)
    _add_env(p)
    _add_model(p)
    _add_disc(p)

    p = add("current-for-gradient", cmd_current_for_gradient, "current needed for a target axial gradient")
    p.add_argument("--target", type=_q("gradient"), required=True, help=f"target gradient {_u('gradient')}")
    p.add_argument("--gradient-per-amp", type=_q("gradient_per_current"), default=None,
                   help=f"known gradient per ampere {_u('gradient_per_current')} (default: simulate the design)")
    _add_design(p)
    _add_disc(p)

    p = add("sweep", cmd_sweep, "exhaustive design sweep with feasibility and Pareto front", "CSV")
    _add_design(p, multi=True)
    p.add_argument("--front-out", default=None, help="Pareto-front JSON path (default <out>.front.json)")
    p.add_argument("--workers", type=_positive_int, default=None, help="worker processes, count (default 1)")
    _add_constraints(p)
    _add_env(p)
    _add_model(p)
    _add_disc(p)

    p = add("reconstruct", cmd_reconstruct, "write the reconstructed routed gate-zone layout")
    p.add_argument("--current", type=_q("current"), default=1.0, help=f"drive current {_u('current')} (default 1A)")
    p.add_argument("--unit", choices=("m", "mm", "um"), default="m", help="length unit of the file (default m)")

    return parser


def _echo(args):
    for k, v in sorted(vars(args).items()):
        if k in ("func",) or v is None:
            continue
        print(f"  {k} = {v!r}", file=sys.stderr)


def main(argv: list[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    if args.echo_units:
        _echo(args)
    run = _Run(args, argv)
    try:
        status = args.func(args, run)
        run.finish(status)
        return status
    except NonConvergence as exc:
        print(f"ccwtrap {args.command}: not converged: {exc}", file=sys.stderr)
        return EXIT_NONCONVERGED
    except (InputError, LayoutError, UnitError, DegenerateInputError, TemperatureRangeError,
            ConductorIntersectionError, SingularityError, NullPlacementError, ValueError) as exc:
        print(f"ccwtrap {args.command}: input error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
