"""Command-line front end: analyze | validate | critical | solve | simulate.

Exit codes: 0 success, 2 input error, 3 validation failure, 4 solver did
not converge, 5 no sign change on the critical-parameter path.
"""
from __future__ import annotations

import argparse
import io
import json
import math
import os
import sys
from importlib import metadata

import numba
import numpy as np

from . import asymptotics as asy
from .exceptions import BudgetExceeded, NoBracket, PrioqError, WindowTooSmall
from .genfunc import psi0_at_one, psi0_series
from .model import load_params, new_params
from .oracle import Direction, Method, StationaryGrid, solve_truncated, tail_fit
from .simulate import SimConfig, simulate

SCHEMA_VERSION = "1"
EXIT_OK, EXIT_INPUT, EXIT_VALIDATION, EXIT_SOLVER, EXIT_NO_BRACKET = 0, 2, 3, 4, 5
CONSTANT_TOL = 0.01
RATE_TOL = 1e-3
TV_TOL = 0.01


class InputError(PrioqError):
    pass


# --- JSON with 17 significant digits ------------------------------------------


def _emit(obj, out):
    if obj is None or isinstance(obj, bool):
        out.append(json.dumps(obj))
    elif isinstance(obj, (int, np.integer)):
        out.append(str(int(obj)))
    elif isinstance(obj, (float, np.floating)):
        x = float(obj)
        out.append(format(x, ".17g") if math.isfinite(x) else "null")
    elif isinstance(obj, str):
        out.append(json.dumps(obj))
    elif isinstance(obj, dict):
        out.append("{")
        for n, (k, v) in enumerate(obj.items()):
            if n:
                out.append(", ")
            out.append(json.dumps(str(k)) + ": ")
            _emit(v, out)
        out.append("}")
    elif isinstance(obj, (list, tuple)):
        out.append("[")
        for n, v in enumerate(obj):
            if n:
                out.append(", ")
            _emit(v, out)
        out.append("]")
    else:
        raise TypeError(f"cannot serialise {type(obj).__name__}")


def dumps(report) -> str:
    out: list[str] = []
    _emit(report, out)
    return "".join(out)


# --- argument handling -----------------------------------------------------------


def _pair(text, kind=int):
    parts = [s for s in text.replace(" ", "").split(",") if s]
    if len(parts) != 2:
        raise argparse.ArgumentTypeError(f"expected two comma-separated values, got {text!r}")
    return tuple(kind(s) for s in parts)


def _int_list(text):
    try:
        return [int(s) for s in text.split(",") if s.strip()]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from exc


def _add_param_flags(sp):
    sp.add_argument("--p")
    sp.add_argument("--q")
    sp.add_argument("--mu-h", dest="mu_h")
    sp.add_argument("--mu-l", dest="mu_l")
    sp.add_argument("--config", help="flat key = value file with p, q, mu_h, mu_l")


def _params(args):
    if args.config:
        return load_params(args.config)
    vals = [args.p, args.q, args.mu_h, args.mu_l]
    if any(v is None for v in vals):
        raise InputError("give --p --q --mu-h --mu-l or --config FILE")
    return new_params(*vals)


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="prioq", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="command", required=True)

    an = sub.add_parser("analyze", help="closed-form regime and tail asymptotics")
    _add_param_flags(an)
    an.add_argument("--json", action="store_true", help="JSON report on stdout (default)")
    an.add_argument("--csv", action="store_true", help="asymptotic records as CSV on stdout")
    an.add_argument("--joint-i", type=_int_list, default=[1, 2, 3])
    an.add_argument("--joint-j", type=_int_list, default=[0, 1, 2])
    an.add_argument("--series-out", help="write pi_{0,j} as CSV (j,pi_0j)")
    an.add_argument("--series-n", type=int, default=100)

    va = sub.add_parser("validate", help="closed forms against the truncated-chain oracle")
    _add_param_flags(va)
    va.add_argument("--json", action="store_true")
    va.add_argument("--joint-i", type=_int_list, default=[1, 2, 3])
    va.add_argument("--joint-j", type=_int_list, default=[0, 1])
    va.add_argument("--trunc", type=_pair, default=(400, 400), metavar="NH,NL")
    va.add_argument("--fit-window", type=_pair, default=(40, 80), metavar="A,B",
                    help="index window for low-direction fits")
    va.add_argument("--high-window", type=_pair, default=None, metavar="A,B",
                    help="index window for high-direction fits (default: upper half of usable range)")
    va.add_argument("--method", choices=[m.value for m in Method], default="direct")
    va.add_argument("--simulate", type=int, default=None, metavar="SLOTS")
    va.add_argument("--seed", type=int, default=0)

    cr = sub.add_parser("critical", help="parameters on the F(y0) = 0 surface")
    _add_param_flags(cr)
    cr.add_argument("--anchor", help="anchor parameter file (alternative to the flags)")
    cr.add_argument("--scan", choices=["p", "q", "mu_h"], default="q")
    cr.add_argument("--range", type=lambda s: _pair(s, float), default=None, metavar="A,B")
    cr.add_argument("--out", help="output parameter file (default stdout)")

    so = sub.add_parser("solve", help="solve the truncated chain and export the grid")
    _add_param_flags(so)
    so.add_argument("--trunc", type=_pair, default=(400, 400), metavar="NH,NL")
    so.add_argument("--method", choices=[m.value for m in Method], default="direct")
    so.add_argument("--out", help="grid file; .bin selects the binary layout, anything else CSV")

    si = sub.add_parser("simulate", help="slot-level simulation")
    _add_param_flags(si)
    si.add_argument("--slots", type=int, default=10**7)
    si.add_argument("--seed", type=int, default=0)
    si.add_argument("--warmup", type=int, default=None)
    si.add_argument("--window", type=_pair, default=(40, 40), metavar="NH,NL")
    si.add_argument("--reference", help="oracle grid (CSV or .bin) for the TV distance")
    si.add_argument("--out", help="CSV file for the empirical grid")
    return ap


# --- report pieces ----------------------------------------------------------------


def _versions():
    try:
        pkg = metadata.version("artifact")
    except metadata.PackageNotFoundError:
        pkg = "unknown"
    return {"prioq": pkg, "numpy": np.__version__, "numba": numba.__version__}


def _notes(params):
    notes = [{
        "id": "psi0_at_one",
        "used": psi0_at_one(params),
        "literal_value": (1.0 - params.rho) / params.pbar,
        "text": "psi0(1) = (1 - rho_h)/pbar is forced by P(1,1) = 1; (1 - rho)/pbar is not normalised",
    }]
    low = None
    if params.asymptotics_supported:
        low = asy.marginal_asym(params, Direction.LOW)
    notes.append({
        "id": "low_marginal_identity",
        "used": None if low is None else low.constant,
        "literal_value": None if low is None else low.literal_constant,
        "text": "pi_j^(l) = pbar mu_l [(qbar/q) pi_{0,j+1} + pi_{0,j}], not pbar mu_l pi_{0,j}",
    })
    if low is not None and low.regime is asy.RegimeTag.GEOMETRIC_THREE_HALVES_POWER:
        b = asy.low_boundary_asym(params)
        notes.append({
            "id": "three_halves_constant",
            "used": b.constant,
            "literal_value": b.literal_constant,
            "text": "the j^(-3/2) boundary constant carries an extra factor y0 from the transfer step",
        })
    return notes


def _regime_dict(r):
    return {"tag": r.tag.value, "F_y0": r.F_y0, "dominant_singularity": r.dominant,
            "y0": r.y0, "inv_eta1": r.inv_eta1}


def _records(params, joint_i, joint_j):
    regime = asy.classify_regime(params)
    recs = [asy.low_joint_asym(params, i, regime) for i in sorted({0, *joint_i})]
    recs.append(asy.marginal_asym(params, Direction.LOW))
    recs += [asy.high_joint_asym(params, j) for j in sorted(set(joint_j))]
    recs.append(asy.marginal_asym(params, Direction.HIGH))
    return regime, recs


def _base_report(params, regime, recs):
    return {
        "schema_version": SCHEMA_VERSION,
        "params": params.as_dict(),
        "regime": _regime_dict(regime),
        "asymptotics": [r.as_dict() for r in recs],
        "oracle": None,
        "simulation": None,
        "notes": _notes(params),
        "versions": _versions(),
    }


def _fit_record(grid, rec, window):
    try:
        free = tail_fit(grid, rec.direction, rec.fixed_index, rec.power, window)
        pinned = tail_fit(grid, rec.direction, rec.fixed_index, rec.power, window, rate=rec.rate)
    except WindowTooSmall as exc:
        return {"ok": False, "error": str(exc)}
    gap_c = abs(pinned.constant / rec.constant - 1.0)
    gap_r = abs(free.rate - rec.rate)
    return {
        "fit_rate": free.rate, "fit_constant": pinned.constant, "window": list(pinned.window),
        "max_deviation": pinned.max_deviation, "gap_constant": gap_c, "gap_rate": gap_r,
        "ok": bool(gap_c <= CONSTANT_TOL and gap_r <= RATE_TOL),
    }


# --- commands -------------------------------------------------------------------


def cmd_analyze(args, out):
    params = _params(args)
    regime, recs = _records(params, args.joint_i, args.joint_j)
    report = _base_report(params, regime, recs)
    if args.series_out:
        s = psi0_series(params, args.series_n)
        table = np.column_stack([np.arange(s.size), s])
        np.savetxt(args.series_out, table, fmt=["%d", "%.17g"], delimiter=",",
                   header="j,pi_0j", comments="", newline="\n")
    if args.csv:
        cols = ["direction", "fixed_index", "rate", "power", "constant", "regime"]
        buf = io.StringIO()
        buf.write(",".join(cols) + "\n")
        for r in report["asymptotics"]:
            buf.write(",".join(
                format(r[c], ".17g") if isinstance(r[c], float) else ("" if r[c] is None else str(r[c]))
                for c in cols) + "\n")
        out.write(buf.getvalue())
    else:
        out.write(dumps(report) + "\n")
    return EXIT_OK


def cmd_validate(args, out, err):
    params = _params(args)
    regime, recs = _records(params, args.joint_i, args.joint_j)
    report = _base_report(params, regime, recs)
    nh, nl = args.trunc
    try:
        grid = solve_truncated(params, nh, nl, method=args.method)
    except BudgetExceeded as exc:
        err.write(f"solver did not converge: {exc}\n")
        return EXIT_SOLVER
    failed = []
    for rec, d in zip(recs, report["asymptotics"]):
        window = args.fit_window if rec.direction is Direction.LOW else args.high_window
        d["fit"] = _fit_record(grid, rec, window)
        if not d["fit"]["ok"]:
            failed.append(f"{rec.direction.value}[{rec.fixed_index}]")
    report["oracle"] = {
        "Nh": nh, "Nl": nl, "method": grid.method.value, "residual": grid.residual,
        "edge_mass": grid.edge_mass, "suspect": grid.suspect,
        "pi00": float(grid.values[0, 0]),
        "pi00_gap": abs(grid.values[0, 0] / ((1.0 - params.rho) / (params.pbar * params.qbar)) - 1.0),
    }
    if grid.suspect:
        err.write(f"warning: edge mass {grid.edge_mass:.3g} exceeds 1e-8; enlarge --trunc\n")
        failed.append("truncation")
    if args.simulate:
        wh, wl = min(40, nh), min(40, nl)
        est = simulate(SimConfig(params, args.simulate, seed=args.seed, Nh=wh, Nl=wl))
        report["simulation"] = est.summary(grid)
        if report["simulation"]["tv_distance"] >= TV_TOL:
            failed.append("simulation")
    if failed:
        err.write("validation failed: " + ", ".join(failed) + "\n")
        return EXIT_VALIDATION
    out.write(dumps(report) + "\n")
    return EXIT_OK


def cmd_critical(args, out, err):
    anchor = load_params(args.anchor) if args.anchor else _params(args)
    start, stop = args.range if args.range else (None, None)
    found = asy.find_critical_params(anchor, asy.ScanPath(args.scan, start, stop))
    f_y0 = asy.classify_regime(found).F_y0
    text = "".join(f"{k} = {v!r}\n" for k, v in found.as_dict().items())
    text = f"# F(y0) = {f_y0!r}\n" + text
    if args.out:
        with open(args.out, "w", newline="\n") as fh:
            fh.write(text)
    else:
        out.write(text)
    return EXIT_OK


def cmd_solve(args, out, err):
    params = _params(args)
    nh, nl = args.trunc
    try:
        grid = solve_truncated(params, nh, nl, method=args.method)
    except BudgetExceeded as exc:
        err.write(f"solver did not converge: {exc}\n")
        return EXIT_SOLVER
    if args.out:
        (grid.to_binary if args.out.endswith(".bin") else grid.to_csv)(args.out)
    out.write(dumps({
        "schema_version": SCHEMA_VERSION, "params": params.as_dict(), "Nh": nh, "Nl": nl,
        "method": grid.method.value, "residual": grid.residual, "edge_mass": grid.edge_mass,
        "pi00": float(grid.values[0, 0]), "sweeps": grid.sweeps,
    }) + "\n")
    return EXIT_OK


def _load_grid(path):
    return StationaryGrid.from_binary(path) if path.endswith(".bin") else StationaryGrid.from_csv(path)


def cmd_simulate(args, out, err):
    params = _params(args)
    wh, wl = args.window
    est = simulate(SimConfig(params, args.slots, seed=args.seed, warmup_slots=args.warmup, Nh=wh, Nl=wl))
    if args.out:
        est.to_csv(args.out)
    ref = _load_grid(args.reference) if args.reference else None
    summary = est.summary(ref)
    summary["params"] = params.as_dict()
    summary["schema_version"] = SCHEMA_VERSION
    out.write(dumps(summary) + "\n")
    return EXIT_OK


def _set_threads():
    try:
        n = int(os.environ.get("PRIOQ_THREADS", "1"))
    except ValueError:
        n = 1
    if "NUMBA_THREADING_LAYER" not in os.environ:
        numba.config.THREADING_LAYER = "workqueue"
    numba.set_num_threads(max(1, min(n, numba.config.NUMBA_NUM_THREADS)))


def main(argv=None, out=None, err=None) -> int:
    out = out or sys.stdout
    err = err or sys.stderr
    _set_threads()
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    handlers = {
        "analyze": lambda: cmd_analyze(args, out),
        "validate": lambda: cmd_validate(args, out, err),
        "critical": lambda: cmd_critical(args, out, err),
        "solve": lambda: cmd_solve(args, out, err),
        "simulate": lambda: cmd_simulate(args, out, err),
    }
    try:
        return handlers[args.command]()
    except NoBracket as exc:
        err.write(f"error: {exc}\n")
        return EXIT_NO_BRACKET
    except (PrioqError, OSError) as exc:
        err.write(f"error: {exc}\n")
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
