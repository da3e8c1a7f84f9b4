"""Command-line entry point.

Exit codes: 0 success, 2 I/O error, 3 parse/input error, 4 simulation error.
"""
import argparse
import itertools
import math
import sys

import numpy as np

from . import analysis, fileio
from .controller import DEFAULT_FIT, radius_from_stiffness_fit
from .errors import (
    ConfigurationError, ConvergenceError, DataError, DomainError, FitError, OptimizationError,
    ScenarioParseError, SimulationError,
)
from .geometry import DesignParams
from .simulator import Flag, measure_step_response, simulate
from .statics import CurveKind, CurveSpec, energy_gradient_audit, generate_curve

EXIT_OK, EXIT_IO, EXIT_PARSE, EXIT_SIM = 0, 2, 3, 4

CURVE_RADII_MM = (3.5, 6.9, 10.0, 13.0, 16.0, 19.1)
AUDIT_RADII_MM = (1.0, 2.0, 4.0, 6.9, 10.0, 13.0, 16.0, 19.0)
AUDIT_ALPHAS = (0.01, 0.05, 0.1, 0.2, 0.3, 0.5)


class CliError(Exception):
    def __init__(self, message, code):
        super().__init__(message)
        self.code = code


def stiffness_map_ratios(params, n=201):
    """Radius ratios spanning the reachable band, symmetric about 0.5."""
    lo, hi = params.r_min / params.l, params.r_max / params.l
    return np.linspace(lo, hi, n)


def curve_rows(kind, params):
    if kind == "stiffness-map":
        radii = tuple(stiffness_map_ratios(params) * params.l)
        spec = CurveSpec(radii, (0.0,), CurveKind.STIFFNESS_RATIO_VS_RADIUS_RATIO)
        header = ("r_m", "radius_ratio", "stiffness_ratio")
    elif kind == "torque-deflection":
        alphas = tuple(np.linspace(-0.5, 0.5, 101))
        spec = CurveSpec(tuple(r * 1e-3 for r in CURVE_RADII_MM), alphas, CurveKind.TORQUE_VS_DEFLECTION)
        header = ("r_m", "alpha_rad", "T_O_Nm")
    else:
        alphas = tuple(np.linspace(0.005, 0.5, 100))
        spec = CurveSpec(tuple(r * 1e-3 for r in CURVE_RADII_MM), alphas, CurveKind.STIFFNESS_VS_TORQUE)
        header = ("r_m", "T_O_Nm", "k_e_Nm_per_rad")
    return header, generate_curve(params, spec)


def _write(path, header, rows):
    try:
        fileio.write_table(path, header, rows)
    except OSError as exc:
        raise CliError(f"cannot write {path}: {exc}", EXIT_IO) from None


def _load(path):
    try:
        return fileio.load_scenario(path)
    except FileNotFoundError as exc:
        raise CliError(str(exc), EXIT_IO) from None
    except OSError as exc:
        raise CliError(f"cannot read {path}: {exc}", EXIT_IO) from None
    except ScenarioParseError as exc:
        raise CliError(f"{path}: {exc}", EXIT_PARSE) from None


def _run(scenario):
    try:
        return simulate(scenario)
    except SimulationError as exc:
        raise CliError(f"simulation failed: {exc}", EXIT_SIM) from None


def _flag_names(flags):
    combined = Flag(int(np.bitwise_or.reduce(flags))) if len(flags) else Flag.NONE
    names = [f.name for f in Flag if f and f in combined]
    return "|".join(names) if names else "none"


def summarize(trace):
    peak_out = float(np.max(np.abs(trace["eta_dot"])))
    peak_in = float(np.max(np.abs(trace["phi1_dot"])))
    gain = peak_out / peak_in if peak_in > 0 else math.nan
    return (
        f"peak_eta_dot={peak_out:.4f} rad/s peak_phi1_dot={peak_in:.4f} rad/s "
        f"gain={gain:.4f} max_abs_alpha={float(np.max(np.abs(trace['alpha']))):.5f} rad "
        f"flags={_flag_names(trace['flags'])}"
    )


def cmd_curves(args):
    params = DesignParams()
    header, rows = curve_rows(args.kind, params)
    _write(args.out, header, rows)
    print(f"wrote {len(rows)} rows to {args.out}")


def cmd_simulate(args):
    scenario = _load(args.scenario)
    if args.dt is not None:
        scenario = _with_dt(scenario, args.dt)
    trace = _run(scenario)
    try:
        fileio.write_trace(args.out, trace)
    except OSError as exc:
        raise CliError(f"cannot write {args.out}: {exc}", EXIT_IO) from None
    print(summarize(trace))


def _with_dt(scenario, dt):
    try:
        return scenario.with_changes(dt_physics=dt)
    except ConfigurationError as exc:
        raise CliError(f"--dt: {exc}", EXIT_PARSE) from None


def cmd_step(args):
    scenario = _load(args.scenario)
    if args.dt is not None:
        scenario = _with_dt(scenario, args.dt)
    try:
        trace = _run(scenario)
        result = measure_step_response(scenario, trace)
    except ConfigurationError as exc:
        raise CliError(str(exc), EXIT_PARSE) from None
    except ConvergenceError as exc:
        raise CliError(str(exc), EXIT_SIM) from None
    if args.out:
        _write(args.out, ("t", "r_m", "r_set_m", "delta"),
               zip(trace["t"], trace["r"], trace["r_set"], trace["delta"]))
    print(
        f"t_90={result.t_90 * 1e3:.1f} ms (pivot radius: {result.t_90_radius * 1e3:.1f} ms) "
        f"r {result.r_initial * 1e3:.2f} -> {result.r_final * 1e3:.2f} mm overshoot={result.overshoot:.3f}"
    )


def cmd_fit(args):
    try:
        header, rows = fileio.read_table(args.data)
    except OSError as exc:
        raise CliError(f"cannot read {args.data}: {exc}", EXIT_IO) from None
    except ValueError as exc:
        raise CliError(f"{args.data}: {exc}", EXIT_PARSE) from None
    try:
        i_k, i_r = header.index("k_e"), header.index("r_m")
    except ValueError:
        raise CliError(f"{args.data}: columns k_e and r_m are required", EXIT_PARSE) from None
    data = [(row[i_k], row[i_r]) for row in rows]
    try:
        result = analysis.fit_radius_stiffness(data, scale=args.scale)
    except FitError as exc:
        raise CliError(f"{args.data}: {exc}", EXIT_PARSE) from None
    c = result.coefficients
    print(f"p={c.p:.10g} q={c.q:.10g} residual={result.residual:.3e}")
    if args.out:
        fitted = []
        for k_e, r in sorted(data):
            r_fit, _ = radius_from_stiffness_fit(c, k_e) if k_e > math.exp(-c.q) else (math.nan, False)
            fitted.append((k_e, r, r_fit))
        _write(args.out, ("k_e", "r_m", "r_fit_m"), fitted)


def parse_range(text, key):
    parts = text.split(":")
    try:
        if len(parts) == 1:
            return [float(parts[0])]
        if len(parts) == 3:
            a, b, n = float(parts[0]), float(parts[1]), int(parts[2])
            if n < 1:
                raise ValueError
            return list(np.linspace(a, b, n))
    except ValueError:
        pass
    raise CliError(f"--grid: {key} expects <value> or <start>:<stop>:<count>, got {text!r}", EXIT_PARSE)


GRID_KEYS = {"t_soft": 1.0, "t_stiff": 1.0, "r_low_mm": 1e-3, "r_high_mm": 1e-3}


def parse_grid(spec, scenario):
    ranges = {}
    for item in spec.split(","):
        if "=" not in item:
            raise CliError(f"--grid: expected key=range, got {item!r}", EXIT_PARSE)
        key, value = (s.strip() for s in item.split("=", 1))
        if key not in GRID_KEYS:
            raise CliError(f"--grid: unknown key {key!r}", EXIT_PARSE)
        ranges[key] = [v * GRID_KEYS[key] for v in parse_range(value, key)]
    missing = set(GRID_KEYS) - set(ranges)
    if missing:
        raise CliError(f"--grid: missing {', '.join(sorted(missing))}", EXIT_PARSE)
    grid = []
    for ts, tt, rl, rh in itertools.product(*(ranges[k] for k in GRID_KEYS)):
        cand = analysis.ScheduleCandidate(ts, tt, rl, rh)
        try:
            cand.validate(scenario)
        except DomainError:
            continue
        grid.append(cand)
    if not grid:
        raise CliError("--grid: no valid candidate (need t_soft < t_stiff and reachable radii)", EXIT_PARSE)
    return grid


def cmd_optimize(args):
    scenario = _load(args.scenario)
    grid = parse_grid(args.grid, scenario)
    try:
        best, report = analysis.optimize_schedule(scenario, grid, workers=args.workers)
    except OptimizationError as exc:
        raise CliError(str(exc), EXIT_SIM) from None
    peaks = {c: peak for c, peak, _ in report}
    print(
        f"best t_soft={best.t_soft:.4f} s t_stiff={best.t_stiff:.4f} s "
        f"r_low={best.r_low * 1e3:.2f} mm r_high={best.r_high * 1e3:.2f} mm "
        f"peak_eta_dot={peaks[best]:.4f} rad/s ({len(report)} candidates)"
    )
    if args.out:
        _write(args.out, ("t_soft", "t_stiff", "r_low_m", "r_high_m", "peak_eta_dot", "error"),
               [(c.t_soft, c.t_stiff, c.r_low, c.r_high, peak, err or "") for c, peak, err in report])


def cmd_audit(args):
    params = DesignParams()
    rows = energy_gradient_audit(params, [r * 1e-3 for r in AUDIT_RADII_MM], AUDIT_ALPHAS)
    keys = ("r", "alpha", "T_1", "T_2", "T1_energy", "T2_energy", "T1_rel_dev", "T2_rel_dev")
    if args.out:
        _write(args.out, keys, [[row[k] for k in keys] for row in rows])
    dev1 = [row["T1_rel_dev"] for row in rows if math.isfinite(row["T1_rel_dev"])]
    dev2 = [row["T2_rel_dev"] for row in rows if math.isfinite(row["T2_rel_dev"])]
    print(
        f"{len(rows)} grid points: T_1 deviation median {np.median(dev1):.3f} max {max(dev1):.3f}; "
        f"T_2 deviation median {np.median(dev2):.3f} max {max(dev2):.3f}"
    )


def build_parser():
    parser = argparse.ArgumentParser(prog="dyrac", description=__doc__.splitlines()[0])
    parser.add_argument("--seed", type=int, default=None,
                        help="seed for numpy's global generator (randomized checks only)")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("curves", help="write a characterization curve as CSV")
    p.add_argument("--kind", required=True, choices=("stiffness-map", "torque-deflection", "stiffness-torque"))
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_curves)

    p = sub.add_parser("simulate", help="run a scenario and write its trace")
    p.add_argument("--scenario", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--dt", type=float, default=None, help="override the physics time step [s]")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("step", help="measure the 90 %% time of a stiffness step")
    p.add_argument("--scenario", required=True)
    p.add_argument("--out", default=None, help="CSV of r(t)")
    p.add_argument("--dt", type=float, default=None)
    p.set_defaults(func=cmd_step)

    p = sub.add_parser("fit", help="fit the cubic-log stiffness-to-radius map")
    p.add_argument("--data", required=True, help="CSV with columns k_e, r_m")
    p.add_argument("--out", default=None, help="CSV of the fitted curve")
    p.add_argument("--scale", type=float, default=1e-3)
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("optimize", help="grid-search a hard-soft-hard stiffness schedule")
    p.add_argument("--scenario", required=True)
    p.add_argument("--grid", required=True,
                   help="t_soft=a:b:n,t_stiff=a:b:n,r_low_mm=a:b:n,r_high_mm=a:b:n")
    p.add_argument("--out", default=None)
    p.add_argument("--workers", type=int, default=1)
    p.set_defaults(func=cmd_optimize)

    p = sub.add_parser("audit", help="compare motor holding torques with energy gradients")
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_audit)
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    if args.seed is not None:
        np.random.seed(args.seed)
    try:
        args.func(args)
    except CliError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.code
    except DataError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_PARSE
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
