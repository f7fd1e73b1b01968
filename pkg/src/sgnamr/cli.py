"""Command-line interface: simulation runs, dispersion tables, comparisons.

Subcommands:

  run <config>        execute a full 2-D run and write frames/gauges/
                      transects/manifest into --out
  dispersion          emit the model dispersion table as CSV
                      (kh0,model,omega,scaled_group_velocity)
  compare <a> <b>     error norms between two transect CSV files,
                      reported as key=value lines
  radial1d <config>   run the radially symmetric reference solver on the
                      scenario's radial reduction; writes transect CSVs in
                      the shared format (s = r, y = 0)

<config> is either a key=value file path or the name of a bundled scenario.
Trailing --key=value arguments override configuration fields after the file
is parsed.  Exit codes: 0 success, 1 runtime failure, 2 usage/config error.
"""

import argparse
import sys
from pathlib import Path

import numpy as np

from .analysis import DISPERSION_MODELS, group_speed, omega, transect_error
from .core import eta_of, load_config, parse_overrides
from .driver import _fmt, run_driver
from .radial1d import RadialSolver
from .scenarios import BUILTIN_SCENARIOS, builtin_config, scenario_functions


def _split_overrides(extras):
    pairs = []
    for item in extras:
        if not item.startswith("--") or "=" not in item:
            raise ValueError(
                f"unrecognized argument {item!r} (overrides look like"
                " --key=value)")
        key, _, raw = item[2:].partition("=")
        pairs.append((key, raw))
    return pairs


def _resolve_config(spec, extras):
    if Path(spec).is_file():
        cfg = load_config(spec)
    elif spec in BUILTIN_SCENARIOS:
        cfg = builtin_config(spec)
    else:
        raise ValueError(
            f"{spec!r} is neither a config file nor a bundled scenario"
            f" (builtin: {', '.join(sorted(BUILTIN_SCENARIOS))})")
    parse_overrides(cfg, _split_overrides(extras))
    cfg.validate()
    return cfg


def cmd_run(args, extras):
    cfg = _resolve_config(args.config, extras)
    manifest = run_driver(cfg, args.out)
    print(f"completed {manifest['coarse_steps']} coarse steps to "
          f"t = {manifest['time_final']:g} s; wrote "
          f"{manifest['frames_written']} frames to {args.out}")
    return 0


def cmd_dispersion(args, extras):
    if extras:
        raise ValueError(f"unexpected arguments: {' '.join(extras)}")
    if not (args.kh_min > 0.0 and args.kh_max > args.kh_min):
        raise ValueError("need 0 < kh-min < kh-max")
    if args.points < 2:
        raise ValueError("need at least 2 points")
    kh = np.geomspace(args.kh_min, args.kh_max, args.points)
    k = kh / args.h0
    c0 = np.sqrt(args.g * args.h0)
    lines = ["kh0,model,omega,scaled_group_velocity"]
    for model in DISPERSION_MODELS:
        w = omega(model, k, args.h0, g=args.g, alpha=args.alpha,
                  beta=args.beta)
        cg = group_speed(model, k, args.h0, g=args.g, alpha=args.alpha,
                         beta=args.beta) / c0
        lines.extend(f"{_fmt(kh[i])},{model},{_fmt(w[i])},{_fmt(cg[i])}"
                     for i in range(kh.size))
    text = "\n".join(lines) + "\n"
    if args.out:
        Path(args.out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)
    return 0


def _read_transect_csv(path):
    if not Path(path).is_file():
        raise ValueError(f"transect file not found: {path}")
    data = np.genfromtxt(path, delimiter=",", names=True)
    if data.dtype.names is None or \
            not {"s", "eta"} <= set(data.dtype.names):
        raise ValueError(f"{path}: expected a transect CSV with s,eta columns")
    return np.atleast_1d(data["s"]), np.atleast_1d(data["eta"])


def cmd_compare(args, extras):
    if extras:
        raise ValueError(f"unexpected arguments: {' '.join(extras)}")
    s_a, eta_a = _read_transect_csv(args.simulated)
    s_b, eta_b = _read_transect_csv(args.reference)
    report = transect_error(s_a, eta_a, s_b, eta_b, lo=args.lo, hi=args.hi)
    text = "".join(f"{k}={_fmt(v)}\n" for k, v in report.items())
    if args.out:
        Path(args.out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)
    return 0


def _write_radial_transect(path, solver):
    i = solver.interior
    r = solver.r[i]
    h = solver.h[i]
    B = solver.B[i]
    lines = ["s,x,y,eta,h,B,level"]
    for j in range(r.size):
        eta, dry = eta_of(float(h[j]), float(B[j]), solver.dry_tolerance)
        eta_txt = "nan" if dry else _fmt(eta)
        lines.append(",".join([_fmt(r[j]), _fmt(r[j]), "0", eta_txt,
                               _fmt(h[j]), _fmt(B[j]), "1"]))
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def cmd_radial1d(args, extras):
    cfg = _resolve_config(args.config, extras)
    bed, eta_fn, vel_fn = scenario_functions(cfg)
    length = cfg.x_hi - cfg.x_lo
    if cfg.x_lo != 0.0:
        raise ValueError("radial reduction expects the domain to start at"
                         " x = 0 (the symmetry axis)")
    n = args.n
    dr = length / n
    solver = RadialSolver(
        n, dr, lambda r: bed(r, np.zeros_like(r)),
        geometry=args.geometry,
        model="swe" if cfg.mode == "swe" else "sgn",
        g=cfg.g, alpha=cfg.alpha, sea_level=cfg.sea_level,
        dry_tolerance=cfg.dry_tolerance, h_switch=cfg.h_switch,
        bc_outer="wall" if cfg.bc_right == "wall" else "extrapolation")
    solver.set_initial(
        None if eta_fn is None else lambda r: eta_fn(r, np.zeros_like(r)))
    outdir = Path(args.out)
    outdir.mkdir(parents=True, exist_ok=True)
    out_times = sorted({float(t) for t in cfg.output_times
                        if 0.0 < t <= cfg.t_end})
    if not out_times and cfg.t_end > 0.0:
        out_times = [cfg.t_end]
    index = 0
    _write_radial_transect(outdir / f"transect_{index:04d}.csv", solver)
    for t in out_times:
        solver.run_until(t, cfl=min(cfg.cfl_target, 0.45))
        index += 1
        _write_radial_transect(outdir / f"transect_{index:04d}.csv", solver)
    print(f"radial reference: {index} output(s) at dr = {dr:g} m in {outdir}")
    return 0


def build_parser():
    parser = argparse.ArgumentParser(
        prog="sgnamr",
        description="dispersive shallow-water simulator with adaptive"
                    " refinement")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="execute a 2-D simulation")
    p.add_argument("config", help="config file path or bundled scenario name")
    p.add_argument("--out", default="out", help="output directory")
    p.set_defaults(fn=cmd_run)

    p = sub.add_parser("dispersion", help="write the dispersion-relation CSV")
    p.add_argument("--h0", type=float, default=1000.0)
    p.add_argument("--g", type=float, default=9.81)
    p.add_argument("--alpha", type=float, default=1.153)
    p.add_argument("--beta", type=float, default=1.0 / 15.0)
    p.add_argument("--kh-min", dest="kh_min", type=float, default=0.01)
    p.add_argument("--kh-max", dest="kh_max", type=float, default=60.0)
    p.add_argument("--points", type=int, default=200)
    p.add_argument("--out", default=None, help="CSV path (default stdout)")
    p.set_defaults(fn=cmd_dispersion)

    p = sub.add_parser("compare", help="error norms between two transects")
    p.add_argument("simulated")
    p.add_argument("reference")
    p.add_argument("--lo", type=float, default=None)
    p.add_argument("--hi", type=float, default=None)
    p.add_argument("--out", default=None, help="report path (default stdout)")
    p.set_defaults(fn=cmd_compare)

    p = sub.add_parser("radial1d",
                       help="run the radial reference solver on a scenario")
    p.add_argument("config", help="config file path or bundled scenario name")
    p.add_argument("--out", default="out1d", help="output directory")
    p.add_argument("--n", type=int, default=4000, help="number of cells")
    p.add_argument("--geometry", choices=("radial", "plane"),
                   default="radial")
    p.set_defaults(fn=cmd_radial1d)
    return parser


def main(argv=None):
    parser = build_parser()
    try:
        args, extras = parser.parse_known_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return args.fn(args, extras)
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # solver failures, I/O trouble mid-run
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
