"""End-to-end tests of the run driver: products, determinism, invariants."""

import numpy as np
import pytest

from sgnamr.amr import Hierarchy
from sgnamr.analysis import transect_table
from sgnamr.core import NGHOST, SimConfig
from sgnamr.driver import run_driver


def small_config(**kw):
    base = dict(mode="sgn_subcycled", cfl_target=0.45,
                x_lo=0.0, x_hi=4000.0, y_lo=0.0, y_hi=4000.0,
                mx=20, my=20, bathymetry="flat:100",
                ic="gaussian:0.5:600:2000:2000",
                bc_left="wall", bc_bottom="wall",
                bc_right="wall", bc_top="wall",
                max_levels=2, refine_ratio_space=(2,), refine_ratio_time=(2,),
                flag_tolerance=0.02, regrid_interval=2, t_end=20.0)
    base.update(kw)
    return SimConfig(**base)


def parse_frame(path):
    """Read a frame file back into a list of patch dicts."""
    patches = []
    with open(path, encoding="utf-8") as f:
        current = None
        for line in f:
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            if line.startswith("patch "):
                tok = line.split()
                current = {
                    "level": int(tok[1]), "i_lo": int(tok[2]),
                    "j_lo": int(tok[3]), "mx": int(tok[4]), "my": int(tok[5]),
                    "dx": float(tok[6]), "dy": float(tok[7]),
                    "x_lo": float(tok[8]), "y_lo": float(tok[9]), "rows": []}
                patches.append(current)
            else:
                current["rows"].append([float(v) for v in line.split()])
    for p in patches:
        assert len(p["rows"]) == p["mx"] * p["my"]
        p["data"] = np.asarray(p["rows"]).reshape(p["mx"], p["my"], 6)
        del p["rows"]
    return patches


def read_manifest(path):
    out = {}
    for line in open(path, encoding="utf-8"):
        k, _, v = line.strip().partition("=")
        out[k] = v
    return out


def test_zero_output_times_writes_only_initial_frame(tmp_path):
    cfg = small_config(t_end=6.0, output_times=())
    run_driver(cfg, tmp_path)
    frames = sorted(p.name for p in tmp_path.glob("frame_*.txt"))
    assert frames == ["frame_0000.txt"]
    assert not list(tmp_path.glob("transect_*.csv"))
    assert (tmp_path / "manifest.txt").exists()


def test_frame_structure_and_exact_output_time(tmp_path):
    cfg = small_config(t_end=10.0, output_times=(10.0,),
                       transect=(0.0, 2000.0, 4000.0, 2000.0),
                       transect_points=81)
    run_driver(cfg, tmp_path)
    first = (tmp_path / "frame_0001.txt").read_text().splitlines()[0]
    assert first == "# time 10"
    patches = parse_frame(tmp_path / "frame_0001.txt")
    level1 = [p for p in patches if p["level"] == 1]
    assert len(level1) == 1 and level1[0]["mx"] == 20
    assert any(p["level"] == 2 for p in patches)
    # eta column consistent with h + B on the coarse patch (flat bed -100)
    d = level1[0]["data"]
    assert np.allclose(d[:, :, 3], d[:, :, 0] - 100.0, atol=1e-12)
    trans = (tmp_path / "transect_0001.csv").read_text().splitlines()
    assert trans[0] == "s,x,y,eta,h,B,level"
    assert len(trans) == 82


def test_repeat_runs_are_byte_identical(tmp_path):
    outs = []
    for name in ("a", "b"):
        cfg = small_config(t_end=16.0, output_times=(8.0, 16.0),
                           gauges=((2000.0, 2000.0), (700.0, 2900.0)),
                           transect=(0.0, 2000.0, 4000.0, 2000.0))
        run_driver(cfg, tmp_path / name)
        outs.append(tmp_path / name)
    for pattern in ("frame_*.txt", "gauge_*.csv", "transect_*.csv"):
        files = sorted(p.name for p in outs[0].glob(pattern))
        assert files
        for name in files:
            assert (outs[0] / name).read_bytes() == (outs[1] / name).read_bytes()


def test_gauge_times_strictly_increase_and_record_levels(tmp_path):
    cfg = small_config(t_end=12.0, gauges=((2000.0, 2000.0),))
    run_driver(cfg, tmp_path)
    rows = (tmp_path / "gauge_00.csv").read_text().splitlines()
    assert rows[0] == "t,h,hu,hv,eta,level"
    t = np.array([float(r.split(",")[0]) for r in rows[1:]])
    lev = np.array([int(r.split(",")[5]) for r in rows[1:]])
    assert np.all(np.diff(t) > 0)
    assert lev.max() == 2  # the gauge sits inside the refined region


def test_dry_gauge_reports_ground_elevation(tmp_path):
    cfg = SimConfig(mode="swe", x_lo=0.0, x_hi=160e3, y_lo=0.0, y_hi=160e3,
                    mx=20, my=20, bathymetry="radial_shelf", ic="lake_at_rest",
                    bc_left="wall", bc_bottom="wall",
                    bc_right="extrapolation", bc_top="extrapolation",
                    max_levels=1, t_end=1e9, max_steps=3,
                    gauges=((150e3, 4000.0),))
    run_driver(cfg, tmp_path)
    rows = (tmp_path / "gauge_00.csv").read_text().splitlines()[1:]
    h = np.array([float(r.split(",")[1]) for r in rows])
    eta = np.array([float(r.split(",")[4]) for r in rows])
    assert np.all(h == 0.0)
    assert np.all(eta > 100.0)  # the beach stands well above sea level there


def test_manifest_recursion_count_identity(tmp_path):
    cfg = small_config(max_levels=3, refine_ratio_space=(2, 2),
                       refine_ratio_time=(2, 2), t_end=1e9, max_steps=5,
                       flag_tolerance=1e9,
                       forced_regions=((2, 800.0, 3200.0, 800.0, 3200.0),
                                       (3, 1200.0, 2800.0, 1200.0, 2800.0)))
    man = run_driver(cfg, tmp_path)
    assert man["coarse_steps"] == 5
    assert man["steps_level_2"] == 2 * man["steps_level_1"]
    assert man["steps_level_3"] == 4 * man["steps_level_1"]
    disk = read_manifest(tmp_path / "manifest.txt")
    assert disk["steps_level_3"] == "20"
    assert disk["config.mode"] == "sgn_subcycled"
    assert int(disk["krylov_iterations_total"]) > 0


def test_error_diagnostic_names_step_and_time(tmp_path):
    cfg = small_config(solver_maxit=1, solver_rtol=1e-15, t_end=5.0)
    with pytest.raises(RuntimeError, match=r"coarse step 1, t = 0"):
        run_driver(cfg, tmp_path)


def test_psi_and_conserved_ghosts_share_one_interpolation_path(monkeypatch):
    cfg = small_config(ic="lake_at_rest", flag_tolerance=1e9,
                       forced_regions=((2, 1000.0, 3000.0, 1000.0, 3000.0),))
    from sgnamr.scenarios import scenario_functions
    bed, eta_fn, vel_fn = scenario_functions(cfg)
    h = Hierarchy(cfg, bed, eta_fn, vel_fn)

    orig = Hierarchy._interp_from_parent
    calls = []

    def spy(self, patch, theta, target):
        cov = orig(self, patch, theta, target)
        if patch.level == 2:
            patch.hu[cov] += 7.25
            patch.psi1[cov] += 7.25
            calls.append(int(np.count_nonzero(cov)))
        return cov

    monkeypatch.setattr(Hierarchy, "_interp_from_parent", spy)
    h.fill_level_ghosts(2, 1.0)
    assert calls and calls[0] > 0
    p = h.levels[2][0]
    # every in-domain ghost cell of the lone fine patch came from the single
    # interpolation call: both the conserved and the correction field carry
    # the marker exactly (the rest state interpolates to zero)
    ghost = np.ones_like(p.hu, dtype=bool)
    ghost[p.interior] = False
    assert np.all(p.hu[ghost] == 7.25)
    assert np.all(p.psi1[ghost] == 7.25)
    assert np.all(p.hu[p.interior] == 0.0)
    assert np.all(p.psi1[p.interior] == 0.0)


def test_radial_symmetry_preserved_on_quadrant(tmp_path):
    cfg = SimConfig(mode="sgn_subcycled", cfl_target=0.45,
                    x_lo=0.0, x_hi=80e3, y_lo=0.0, y_hi=80e3,
                    mx=40, my=40, bathymetry="flat:4000",
                    ic="gaussian:0.0001:10000",
                    bc_left="wall", bc_bottom="wall",
                    bc_right="extrapolation", bc_top="extrapolation",
                    max_levels=2, refine_ratio_space=(2,),
                    refine_ratio_time=(2,), flag_tolerance=1e9,
                    forced_regions=((2, 0.0, 40e3, 0.0, 40e3),),
                    t_end=1e9, max_steps=100)
    from sgnamr.scenarios import scenario_functions
    bed, eta_fn, vel_fn = scenario_functions(cfg)
    h = Hierarchy(cfg, bed, eta_fn, vel_fn)
    for _ in range(100):
        h.advance(h.stable_dt())
    c = 500.0  # first fine-row center distance from each wall
    s = np.linspace(c, 79e3, 180)
    points_x = np.column_stack([s, np.full_like(s, c)])
    points_y = np.column_stack([np.full_like(s, c), s])
    tx = transect_table(list(h.all_patches()), points_x, cfg.dry_tolerance)
    ty = transect_table(list(h.all_patches()), points_y, cfg.dry_tolerance)
    assert np.nanmax(np.abs(tx["eta"])) > 5e-6    # the wave is really there
    assert np.nanmax(np.abs(tx["eta"] - ty["eta"])) <= 1e-8
