"""End-to-end acceptance checks on the bundled scenarios.

Each test exercises one shipped behavior through the public entry points
(run_driver, the CLI, the 1-D radial reference solver) and prints the
quantities it judges next to the pinned limits.  Run with -v to get one
pass/fail line per check; fixtures are session-scoped so the expensive
simulations run once and are shared.
"""

import time
from pathlib import Path

import numpy as np
import pytest

from sgnamr.analysis import (count_extrema, leading_crest,
                             measure_phase_speed, omega)
from sgnamr.cli import main as cli_main
from sgnamr.driver import run_driver
from sgnamr.radial1d import RadialSolver
from sgnamr.scenarios import builtin_config


# ---------------------------------------------------------------------------
# helpers
# ---------------------------------------------------------------------------

def read_manifest(outdir):
    d = {}
    for line in (outdir / "manifest.txt").read_text().splitlines():
        if "=" in line:
            k, _, v = line.partition("=")
            d[k.strip()] = v.strip()
    return d


def read_transect(outdir):
    a = np.loadtxt(outdir / "transect_0001.csv", delimiter=",", skiprows=1)
    return a[:, 0], a[:, 3]


def timed_run(cfg, outdir):
    t0 = time.perf_counter()
    run_driver(cfg, outdir)
    return time.perf_counter() - t0


# ---------------------------------------------------------------------------
# shared runs
# ---------------------------------------------------------------------------

@pytest.fixture(scope="session")
def rest_run(tmp_path_factory):
    out = tmp_path_factory.mktemp("acc") / "rest"
    cfg = builtin_config("shelf-rest", max_steps=100, t_end=1e12,
                         output_times=())
    elapsed = timed_run(cfg, out)
    return read_manifest(out), elapsed


@pytest.fixture(scope="session")
def reference_1d():
    t0 = time.perf_counter()
    s = RadialSolver(4000, 20.0, lambda r: np.full_like(r, -4000.0))
    s.set_initial(eta0=lambda r: np.exp(-(r / 2000.0) ** 2))
    s.run_until(300.0, cfl=0.45)
    elapsed = time.perf_counter() - t0
    r, eta = s.r_cells(), s.eta()
    crest_r, crest_amp = leading_crest(r, eta, threshold_frac=0.3)
    return {"r": r, "eta": eta, "crest_r": crest_r, "crest_amp": crest_amp,
            "elapsed": elapsed}


@pytest.fixture(scope="session")
def radial_runs(tmp_path_factory):
    """The radial scenario in every configuration the checks compare."""
    base = tmp_path_factory.mktemp("radial")
    runs = {}
    for tag, overrides in [
        ("levels2", dict(max_levels=2)),
        ("levels3", dict()),
        ("levels4", dict(max_levels=4)),
        ("composite", dict(mode="sgn_composite")),
        ("swe", dict(mode="swe")),
    ]:
        out = base / tag
        elapsed = timed_run(builtin_config("radial-flat", **overrides), out)
        runs[tag] = {"out": out, "elapsed": elapsed}
    return runs


@pytest.fixture(scope="session")
def dispersion_tables(tmp_path_factory):
    base = tmp_path_factory.mktemp("disp")
    paths = {"tuned": base / "tuned.csv", "unity": base / "unity.csv"}
    rc = cli_main(["dispersion", "--kh-max", "50",
                   "--out", str(paths["tuned"])])
    assert rc == 0
    rc = cli_main(["dispersion", "--kh-max", "50", "--alpha", "1",
                   "--beta", "0", "--out", str(paths["unity"])])
    assert rc == 0

    def parse(path):
        rows = {}
        for line in path.read_text().splitlines()[1:]:
            kh, model, w, cg = line.split(",")
            rows.setdefault(model, []).append(
                (float(kh), float(w), float(cg)))
        return {m: np.array(v) for m, v in rows.items()}

    return {k: parse(p) for k, p in paths.items()}


# ---------------------------------------------------------------------------
# the checks, in order
# ---------------------------------------------------------------------------

def test_still_water_over_shelf_stays_flat_through_regridding(rest_run):
    manifest, elapsed = rest_run
    surface = float(manifest["max_surface_final"])
    correction = float(manifest["max_correction_final"])
    print(f"rest state after 100 coarse steps: max|eta| = {surface:.3e} m "
          f"(limit 1e-12), max|psi| = {correction:.3e} (limit 1e-12), "
          f"{elapsed:.1f} s (limit 30)")
    assert surface <= 1e-12
    assert correction <= 1e-12
    assert elapsed < 30.0


def test_plane_wave_speed_matches_the_tuned_dispersion_model():
    t0 = time.perf_counter()
    h0, amp = 1000.0, 0.01
    k = 1.0 / h0                      # k h0 = 1
    c_swe = np.sqrt(9.81 * h0)
    results = {}
    for model in ("sgn", "swe"):
        c_model = float(omega(model, k, h0) / k)
        s = RadialSolver(1500, 40.0, lambda r: np.full_like(r, -h0),
                         geometry="plane", model=model)
        s.set_initial(eta0=lambda r: amp * np.sin(k * r),
                      u0=lambda r: c_model * amp * np.sin(k * r) / h0)
        r = s.r_cells()
        frames, times = [], np.arange(30.0, 211.0, 15.0)
        for t in times:
            s.run_until(t, cfl=0.45)
            frames.append(s.eta())
        c = measure_phase_speed(r, frames, times, lo=30e3, hi=36e3,
                                expected_speed=c_model)
        results[model] = (c, c_model)
    elapsed = time.perf_counter() - t0

    c, c_model = results["sgn"]
    rel = abs(c - c_model) / c_model
    below = (c_swe - c) / c_swe
    print(f"dispersive plane wave at k*h0=1: measured {c:.3f} m/s vs model "
          f"{c_model:.3f} (rel err {rel:.4f}, limit 0.02); "
          f"{below:.4f} below the shallow-water speed (needs >= 0.08)")
    assert rel <= 0.02
    assert below >= 0.08

    c, _ = results["swe"]
    rel = abs(c - c_swe) / c_swe
    print(f"shallow-water plane wave: measured {c:.3f} m/s vs sqrt(g*h0) "
          f"{c_swe:.3f} (rel err {rel:.4f}, limit 0.01); "
          f"total {elapsed:.1f} s (limit 60)")
    assert rel <= 0.01
    assert elapsed < 60.0


@pytest.mark.slow
def test_adaptive_crest_matches_the_radial_reference(radial_runs,
                                                     reference_1d):
    s, eta = read_transect(radial_runs["levels3"]["out"])
    crest_x, crest_amp = leading_crest(s, eta, threshold_frac=0.3)
    ref_r = reference_1d["crest_r"]
    ref_amp = reference_1d["crest_amp"]
    amp_err = abs(crest_amp - ref_amp) / ref_amp
    loc_err = abs(crest_x - ref_r)
    elapsed = radial_runs["levels3"]["elapsed"] + reference_1d["elapsed"]
    print(f"leading crest: simulated {crest_amp:.6f} m at {crest_x:.0f} m vs "
          f"reference {ref_amp:.6f} m at {ref_r:.0f} m -> amplitude error "
          f"{amp_err:.4f} (limit 0.05), location error {loc_err:.0f} m "
          f"(limit 3200 = two coarse cells); {elapsed:.0f} s (limit 600)")
    assert amp_err <= 0.05
    assert loc_err <= 3200.0
    assert elapsed < 600.0


@pytest.mark.slow
def test_subcycled_and_composite_modes_agree(radial_runs, reference_1d):
    s_a, eta_a = read_transect(radial_runs["levels3"]["out"])
    s_b, eta_b = read_transect(radial_runs["composite"]["out"])
    assert np.allclose(s_a, s_b)
    both = np.isfinite(eta_a) & np.isfinite(eta_b)
    diff = float(np.max(np.abs(eta_a[both] - eta_b[both])))
    limit = 0.03 * reference_1d["crest_amp"]
    print(f"max |surface difference| between stepping modes = {diff:.3e} m "
          f"(limit {limit:.3e} = 3% of the leading crest)")
    assert diff <= limit


@pytest.mark.slow
def test_crest_error_shrinks_as_levels_are_added(radial_runs, reference_1d):
    rr, er = reference_1d["r"], reference_1d["eta"]
    rp = reference_1d["crest_r"]
    errors = []
    for tag in ("levels2", "levels3", "levels4"):
        s, eta = read_transect(radial_runs[tag]["out"])
        w = np.isfinite(eta) & (s >= rp - 8e3) & (s <= rp + 8e3)
        l1 = float(np.mean(np.abs(eta[w] - np.interp(s[w], rr, er))))
        errors.append(l1)
    print("crest-window L1 error vs reference: "
          + "  ".join(f"{n} levels: {e:.3e}"
                      for n, e in zip((2, 3, 4), errors))
          + "  (must be strictly decreasing)")
    assert errors[0] > errors[1] > errors[2]


@pytest.mark.slow
def test_closed_basin_conserves_mass_exactly(tmp_path_factory):
    out = tmp_path_factory.mktemp("mass") / "walls"
    cfg = builtin_config("radial-flat", bc_right="wall", bc_top="wall",
                         max_steps=200, t_end=1e12, output_times=())
    timed_run(cfg, out)
    drift = float(read_manifest(out)["mass_drift_rel"])
    print(f"relative mass drift over 200 coarse steps in a closed basin: "
          f"{drift:.3e} (limit 1e-12)")
    assert drift <= 1e-12


def test_solve_counts_follow_the_subcycling_recursion(rest_run):
    manifest, _ = rest_run
    steps = {l: int(manifest[f"steps_level_{l}"]) for l in (1, 2, 3)}
    solves = {l: int(manifest[f"solves_level_{l}"]) for l in (1, 2, 3)}
    print(f"steps {steps}, elliptic solves {solves}: expect 2 per step on "
          f"levels 1 and 2 (own + provisional), 1 per step on the finest")
    assert steps[2] == 2 * steps[1]
    assert steps[3] == 2 * steps[2]
    assert solves[1] == 2 * steps[1]
    assert solves[2] == 2 * steps[2]
    assert solves[3] == 1 * steps[3]


def test_dispersion_table_has_the_expected_structure(dispersion_tables):
    tuned = dispersion_tables["tuned"]
    unity = dispersion_tables["unity"]

    swe_cg = tuned["swe"][:, 2]
    assert np.max(np.abs(swe_cg - 1.0)) <= 1e-12

    kh_last = tuned["airy"][-1, 0]
    airy_tail = tuned["airy"][-1, 2]
    sgn_tail = tuned["sgn"][-1, 2]
    print(f"scaled group velocity at k*h0 = {kh_last:.0f}: shallow-water "
          f"= 1 everywhere, airy {airy_tail:.4f} (< 0.15), tuned dispersive "
          f"{sgn_tail:.4f} (> 0.2)")
    assert kh_last == 50.0
    assert airy_tail < 0.15
    assert sgn_tail > 0.2

    # with the tuning parameters neutralized the two dispersive families
    # coincide
    dw = np.max(np.abs(unity["sgn"][:, 1] - unity["ms"][:, 1]))
    dc = np.max(np.abs(unity["sgn"][:, 2] - unity["ms"][:, 2]))
    print(f"neutral-parameter agreement: max |d omega| = {dw:.2e}, "
          f"max |d group velocity| = {dc:.2e} (limits 1e-12)")
    assert dw <= 1e-12
    assert dc <= 1e-12


@pytest.mark.slow
def test_dispersive_mode_produces_a_trailing_wave_train(radial_runs):
    threshold = 1e-3
    counts = {}
    for tag in ("levels3", "swe"):
        s, eta = read_transect(radial_runs[tag]["out"])
        crest_x, _ = leading_crest(s, eta, threshold_frac=0.3)
        counts[tag] = count_extrema(s, eta, threshold, lo=2e3, hi=crest_x)
    print(f"local extrema behind the leading crest (swing > {threshold} m): "
          f"dispersive {counts['levels3']}, shallow-water {counts['swe']} "
          f"(dispersive must be strictly greater)")
    assert counts["levels3"] > counts["swe"]
