import numpy as np
import pytest

from sgnamr.core import (NGHOST, Patch, SimConfig, check_no_overlap, dump_config,
                         eta_of, load_config, read_ascii_grid, sample_bathymetry,
                         write_ascii_grid, Bathymetry)


def test_defaults_match_documented_values():
    cfg = SimConfig()
    assert cfg.g == 9.81
    assert cfg.alpha == 1.153
    assert cfg.dry_tolerance == 1e-3
    assert cfg.cfl_target == 0.9
    assert cfg.solver_rtol == 1e-9


def test_load_config_parses_types_and_comments(tmp_path):
    text = """
# comment line
mode = sgn_composite
mx = 40            # trailing comment
solver_rtol = 1e-9
output_times = 10.0, 20.0, 30.0
gauges = 100.0:200.0, 5.0:6.0
refine_ratio_space = 4,2
forced_regions = 2:0.0:100.0:0.0:50.0
"""
    p = tmp_path / "run.cfg"
    p.write_text(text)
    cfg = load_config(p)
    assert cfg.mode == "sgn_composite"
    assert cfg.mx == 40
    assert cfg.solver_rtol == 1e-9  # exact round-trip of the literal
    assert cfg.output_times == (10.0, 20.0, 30.0)
    assert cfg.gauges == ((100.0, 200.0), (5.0, 6.0))
    assert cfg.refine_ratio_space == (4, 2)
    assert cfg.forced_regions == ((2, 0.0, 100.0, 0.0, 50.0),)


def test_config_dump_roundtrip():
    cfg = SimConfig(mx=33, my=17, solver_rtol=1e-9, alpha=1.01,
                    gauges=((1.5, 2.5),), output_times=(1.0, 2.0),
                    allowed_regions=((2, 0.0, 1.0, 0.0, 1.0),))
    text = dump_config(cfg)
    cfg2 = load_config(text, from_string=True)
    assert cfg2 == cfg


def test_unknown_key_and_bad_values_are_rejected(tmp_path):
    with pytest.raises(ValueError, match="no_such_key"):
        load_config("no_such_key = 3\n", from_string=True)
    with pytest.raises(ValueError, match="mode"):
        load_config("mode = nonsense\n", from_string=True)
    with pytest.raises(ValueError, match="refine_ratio_space"):
        load_config("refine_ratio_space = 1\nmax_levels = 2\n", from_string=True)
    with pytest.raises(ValueError, match=":2:"):
        load_config("# line one\nmx = not_an_int\n", from_string=True)


def test_eta_of_wet_and_dry():
    val, dry = eta_of(1.5, -4.0, 1e-3)
    assert val == -2.5 and not dry
    val, dry = eta_of(1e-5, 2.0, 1e-3)
    assert val == 2.0 and dry


def test_bilinear_reproduces_plane_exactly(tmp_path):
    # a raster sampled from an affine surface must interpolate it exactly
    x0, y0, cs = 10.0, -5.0, 2.5
    nx, ny = 8, 6
    xs = x0 + cs * np.arange(nx)
    ys = y0 + cs * np.arange(ny)
    X, Y = np.meshgrid(xs, ys, indexing="ij")
    z = 0.75 * X - 1.25 * Y + 3.0
    path = tmp_path / "b.asc"
    write_ascii_grid(path, x0, y0, cs, z)
    bathy = read_ascii_grid(path)
    # node values reproduced exactly
    assert np.array_equal(sample_bathymetry(bathy, X, Y), z)
    # arbitrary interior points reproduce the plane
    rng = np.random.default_rng(1)
    px = rng.uniform(xs[0], xs[-1], 50)
    py = rng.uniform(ys[0], ys[-1], 50)
    expect = 0.75 * px - 1.25 * py + 3.0
    assert np.allclose(sample_bathymetry(bathy, px, py), expect, atol=1e-12)


def test_sampling_outside_extent_raises(tmp_path):
    path = tmp_path / "b.asc"
    write_ascii_grid(path, 0.0, 0.0, 1.0, np.zeros((4, 4)))
    bathy = read_ascii_grid(path)
    with pytest.raises(ValueError):
        sample_bathymetry(bathy, 5.0, 1.0)
    # clamped sampling (ghost cells) is allowed
    assert bathy.sample(5.0, 1.0, clamp=True) == 0.0


def test_raster_row_order_is_north_first(tmp_path):
    # 2 x 2 grid: the first body row holds the northern nodes
    path = tmp_path / "b.asc"
    path.write_text("ncols 2\nnrows 2\nxllcorner 0.0\nyllcorner 0.0\n"
                    "cellsize 1.0\nnodata_value -9999\n"
                    "3.0 4.0\n1.0 2.0\n")
    bathy = read_ascii_grid(path)
    assert sample_bathymetry(bathy, 0.0, 0.0) == 1.0
    assert sample_bathymetry(bathy, 1.0, 0.0) == 2.0
    assert sample_bathymetry(bathy, 0.0, 1.0) == 3.0
    assert sample_bathymetry(bathy, 1.0, 1.0) == 4.0


def test_patch_geometry():
    p = Patch(level=2, i_lo=4, j_lo=6, mx=3, my=2, dx=0.5, dy=0.25,
              origin=(100.0, 200.0))
    assert p.h.shape == (3 + 2 * NGHOST, 2 + 2 * NGHOST)
    assert p.i_hi == 6 and p.j_hi == 7
    x = p.x_centers(with_ghosts=False)
    y = p.y_centers(with_ghosts=False)
    assert np.allclose(x, [100.0 + (4.5) * 0.5, 100.0 + 5.5 * 0.5, 100.0 + 6.5 * 0.5])
    assert np.allclose(y, [200.0 + 6.5 * 0.25, 200.0 + 7.5 * 0.25])
    xg = p.x_centers()
    assert len(xg) == 3 + 2 * NGHOST and np.isclose(xg[NGHOST], x[0])


def test_overlap_detection():
    a = Patch(1, 0, 0, 4, 4, 1.0, 1.0, (0.0, 0.0))
    b = Patch(1, 3, 3, 4, 4, 1.0, 1.0, (0.0, 0.0))
    c = Patch(1, 4, 0, 4, 4, 1.0, 1.0, (0.0, 0.0))
    with pytest.raises(ValueError):
        check_no_overlap([a, b])
    check_no_overlap([a, c])


def test_analytic_bathymetry_callable():
    bathy = Bathymetry(fn=lambda x, y: -1000.0 + 0.0 * x)
    assert sample_bathymetry(bathy, 3.0, 4.0) == -1000.0
