"""Run driver: advances a hierarchy to its end time and writes run products.

Products, all UTF-8 text in the output directory:

  frame_NNNN.txt    full state at t = 0 and at each requested output time.
                    Per patch: a header line
                      patch <level> <i_lo> <j_lo> <mx> <my> <dx> <dy> <x_lo> <y_lo>
                    followed by mx*my data lines `h hu hv eta psi1 psi2` in
                    row-major cell order (x index outer, y index inner).
                    Lines starting with # are comments.
  gauge_NN.csv      one per gauge point: t,h,hu,hv,eta,level sampled from the
                    finest covering patch after every coarse step.
  transect_NNNN.csv one per output time when a transect is configured:
                    s,x,y,eta,h,B,level along the configured segment.
  manifest.txt      key=value summary: the resolved configuration, step and
                    elliptic-solve counts per level, Krylov iteration totals,
                    mass accounting, final surface extrema, wall time.

Output times beyond t_end are ignored.  The step size is the tightest CFL
bound over all levels, clipped so output times and t_end are hit exactly
(a near-sliver remainder is split into two half steps instead).
"""

import time as _time
from pathlib import Path

import numpy as np

from .amr import Hierarchy
from .analysis import transect_table
from .composite import CompositeStepper
from .core import NGHOST, eta_of, dump_config
from .scenarios import scenario_functions

_FMT = "%.17g"


def _fmt(v):
    return _FMT % (v,)


def write_frame(path, hierarchy, t):
    """Write every patch of every level as a self-delimiting text block."""
    lines = [f"# time {_fmt(t)}"]
    for l in sorted(hierarchy.levels):
        for p in hierarchy.levels[l]:
            x_lo = p.origin[0] + p.i_lo * p.dx
            y_lo = p.origin[1] + p.j_lo * p.dy
            lines.append(
                f"patch {p.level} {p.i_lo} {p.j_lo} {p.mx} {p.my} "
                f"{_fmt(p.dx)} {_fmt(p.dy)} {_fmt(x_lo)} {_fmt(y_lo)}")
            ii = p.interior
            cols = [p.h[ii], p.hu[ii], p.hv[ii],
                    p.h[ii] + p.B[ii], p.psi1[ii], p.psi2[ii]]
            flat = np.column_stack([c.ravel(order="C") for c in cols])
            lines.extend(" ".join(_fmt(v) for v in row) for row in flat)
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def transect_points(cfg):
    """Sample coordinates (s, x, y) of the configured transect segment."""
    x0, y0, x1, y1 = cfg.transect
    length = float(np.hypot(x1 - x0, y1 - y0))
    if length <= 0.0:
        raise ValueError("transect endpoints coincide")
    s = np.linspace(0.0, length, cfg.transect_points)
    x = x0 + s * (x1 - x0) / length
    y = y0 + s * (y1 - y0) / length
    return s, x, y


def write_transect(path, hierarchy, cfg):
    s, x, y = transect_points(cfg)
    tab = transect_table(list(hierarchy.all_patches()),
                         np.column_stack([x, y]),
                         cfg.dry_tolerance, cfg.sea_level)
    lines = ["s,x,y,eta,h,B,level"]
    for i in range(s.size):
        lines.append(",".join([
            _fmt(s[i]), _fmt(x[i]), _fmt(y[i]), _fmt(tab["eta"][i]),
            _fmt(tab["h"][i]), _fmt(tab["B"][i]), str(int(tab["level"][i]))]))
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def sample_gauge(hierarchy, xg, yg, cfg):
    """(h, hu, hv, eta, level) at the finest patch covering the point."""
    best = None
    for p in hierarchy.all_patches():
        x0 = p.origin[0] + p.i_lo * p.dx
        y0 = p.origin[1] + p.j_lo * p.dy
        ix = int(np.floor((xg - x0) / p.dx))
        iy = int(np.floor((yg - y0) / p.dy))
        if 0 <= ix < p.mx and 0 <= iy < p.my and \
                (best is None or p.level > best[0]):
            i, j = NGHOST + ix, NGHOST + iy
            h = float(p.h[i, j])
            eta, _dry = eta_of(h, float(p.B[i, j]), cfg.dry_tolerance)
            best = (p.level, h, float(p.hu[i, j]), float(p.hv[i, j]), eta)
    if best is None:
        raise ValueError(f"gauge ({xg}, {yg}) not covered by any patch")
    level, h, hu, hv, eta = best
    return h, hu, hv, eta, level


def _solver_totals(hierarchy, stepper):
    solves = {l: hierarchy.solvers[l].solves for l in sorted(hierarchy.solvers)}
    iterations = sum(s.iterations for s in hierarchy.solvers.values())
    composite_solves = 0
    if isinstance(stepper, CompositeStepper):
        composite_solves = stepper.solver.solves
        iterations += stepper.solver.iterations
    return solves, iterations, composite_solves


def run_driver(cfg, outdir):
    """Run a configured scenario to completion; returns the manifest dict."""
    cfg.validate()
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    for xg, yg in cfg.gauges:
        if not (cfg.x_lo <= xg <= cfg.x_hi and cfg.y_lo <= yg <= cfg.y_hi):
            raise ValueError(f"gauge ({xg}, {yg}) lies outside the domain")

    t_start = _time.perf_counter()
    bed, eta_fn, vel_fn = scenario_functions(cfg)
    hierarchy = Hierarchy(cfg, bed, eta_fn, vel_fn)
    stepper = CompositeStepper(hierarchy) if cfg.mode == "sgn_composite" \
        else hierarchy

    out_times = sorted({float(t) for t in cfg.output_times
                        if 0.0 < t <= cfg.t_end})
    frame_index = 0
    write_frame(outdir / f"frame_{frame_index:04d}.txt", hierarchy, 0.0)
    if cfg.transect and any(t == 0.0 for t in cfg.output_times):
        write_transect(outdir / f"transect_{frame_index:04d}.csv",
                       hierarchy, cfg)

    gauge_rows = [[] for _ in cfg.gauges]

    def record_gauges(t):
        for gi, (xg, yg) in enumerate(cfg.gauges):
            h, hu, hv, eta, level = sample_gauge(hierarchy, xg, yg, cfg)
            gauge_rows[gi].append((t, h, hu, hv, eta, level))

    record_gauges(0.0)
    mass_initial = hierarchy.total_mass()
    max_courant = 0.0
    steps = 0
    eps = 1e-9 * max(1.0, abs(cfg.t_end))

    while hierarchy.time < cfg.t_end - eps and steps < cfg.max_steps:
        t = hierarchy.time
        target = out_times[frame_index] if frame_index < len(out_times) \
            else cfg.t_end
        try:
            dt_stable = stepper.stable_dt()
            remaining = target - t
            if dt_stable >= remaining:
                dt = remaining
            elif dt_stable >= 0.5 * remaining:
                dt = 0.5 * remaining
            else:
                dt = dt_stable
            if not dt > 0.0:
                raise RuntimeError(f"non-positive step size {dt}")
            courant = stepper.advance(dt)
        except Exception as exc:
            raise RuntimeError(
                f"run aborted at coarse step {steps + 1}, "
                f"t = {t:.6g} s: {exc}") from exc
        steps += 1
        max_courant = max(max_courant, courant)
        if abs(hierarchy.time - target) <= eps:
            hierarchy.time = target
        record_gauges(hierarchy.time)
        while frame_index < len(out_times) and \
                hierarchy.time >= out_times[frame_index] - eps:
            frame_index += 1
            write_frame(outdir / f"frame_{frame_index:04d}.txt",
                        hierarchy, hierarchy.time)
            if cfg.transect:
                write_transect(outdir / f"transect_{frame_index:04d}.csv",
                               hierarchy, cfg)

    for gi in range(len(cfg.gauges)):
        lines = ["t,h,hu,hv,eta,level"]
        for t, h, hu, hv, eta, level in gauge_rows[gi]:
            lines.append(",".join([_fmt(t), _fmt(h), _fmt(hu), _fmt(hv),
                                   _fmt(eta), str(level)]))
        (outdir / f"gauge_{gi:02d}.csv").write_text(
            "\n".join(lines) + "\n", encoding="utf-8")

    solves, iterations, composite_solves = _solver_totals(hierarchy, stepper)
    mass_final = hierarchy.total_mass()
    denom = abs(mass_initial) if mass_initial != 0.0 else 1.0
    manifest = {"mode": cfg.mode, "coarse_steps": steps,
                "time_final": hierarchy.time,
                "frames_written": frame_index + 1}
    for l in sorted(hierarchy.levels):
        manifest[f"steps_level_{l}"] = (
            stepper.steps if isinstance(stepper, CompositeStepper)
            else hierarchy.steps[l])
        manifest[f"solves_level_{l}"] = solves[l]
        manifest[f"patches_level_{l}"] = len(hierarchy.levels[l])
    manifest["composite_solves"] = composite_solves
    manifest["krylov_iterations_total"] = iterations
    manifest["max_courant"] = max_courant
    manifest["mass_initial"] = mass_initial
    manifest["mass_final"] = mass_final
    manifest["mass_drift_rel"] = abs(mass_final - mass_initial) / denom
    manifest["max_surface_final"] = hierarchy.max_surface()
    manifest["max_correction_final"] = hierarchy.max_correction()
    manifest["walltime_seconds"] = _time.perf_counter() - t_start

    lines = [f"{k}={_fmt(v) if isinstance(v, float) else v}"
             for k, v in manifest.items()]
    lines += [f"config.{ln.replace(' = ', '=', 1)}"
              for ln in dump_config(cfg).strip().splitlines()]
    (outdir / "manifest.txt").write_text("\n".join(lines) + "\n",
                                         encoding="utf-8")
    return manifest
