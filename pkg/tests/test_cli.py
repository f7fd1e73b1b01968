"""CLI behavior: subcommands, exit codes, override handling, CSV shapes."""

import subprocess
import sys

import numpy as np
import pytest

from sgnamr.cli import main


def read_csv_rows(path):
    lines = path.read_text().strip().splitlines()
    return lines[0], [ln.split(",") for ln in lines[1:]]


def test_dispersion_table_shape_and_limits(tmp_path):
    out = tmp_path / "disp.csv"
    assert main(["dispersion", "--out", str(out)]) == 0
    header, rows = read_csv_rows(out)
    assert header == "kh0,model,omega,scaled_group_velocity"
    assert len(rows) == 800  # 200 points x 4 models
    by_model = {}
    for kh0, model, w, cg in rows:
        by_model.setdefault(model, []).append((float(kh0), float(cg)))
    # non-dispersive limit: swe scaled group velocity is identically 1
    swe = np.array([cg for _, cg in by_model["swe"]])
    assert np.max(np.abs(swe - 1.0)) < 1e-8
    # all models approach 1 at the long-wave endpoint
    for model in ("swe", "airy", "sgn", "ms"):
        kh0, cg = by_model[model][0]
        assert kh0 == pytest.approx(0.01)
        assert cg == pytest.approx(1.0, abs=1e-4)


def test_dispersion_alpha1_matches_beta0(tmp_path):
    out = tmp_path / "disp.csv"
    assert main(["dispersion", "--alpha", "1.0", "--beta", "0.0",
                 "--out", str(out)]) == 0
    _, rows = read_csv_rows(out)
    sgn = [r for r in rows if r[1] == "sgn"]
    ms = [r for r in rows if r[1] == "ms"]
    for a, b in zip(sgn, ms):
        assert abs(float(a[2]) - float(b[2])) <= 1e-12 * max(1.0, float(a[2]))
        assert abs(float(a[3]) - float(b[3])) <= 1e-12


def test_dispersion_rejects_bad_range():
    assert main(["dispersion", "--kh-min", "-1.0"]) == 2
    assert main(["dispersion", "--points", "1"]) == 2


def test_run_builtin_scenario_with_overrides(tmp_path):
    out = tmp_path / "run"
    code = main(["run", "radial-flat", "--out", str(out),
                 "--mx=20", "--my=20", "--max_levels=1", "--max_steps=2",
                 "--t_end=1000000.0"])
    assert code == 0
    manifest = dict(ln.split("=", 1) for ln in
                    (out / "manifest.txt").read_text().strip().splitlines())
    assert manifest["mode"] == "sgn_subcycled"
    assert manifest["coarse_steps"] == "2"
    assert manifest["config.mx"] == "20"


def test_run_mode_override_recorded(tmp_path):
    out = tmp_path / "swe"
    code = main(["run", "radial-flat", "--out", str(out),
                 "--mode=swe", "--mx=20", "--my=20", "--max_levels=1",
                 "--max_steps=2", "--t_end=1000000.0"])
    assert code == 0
    manifest = (out / "manifest.txt").read_text()
    assert "mode=swe" in manifest.splitlines()[0]


def test_run_config_file(tmp_path):
    cfgfile = tmp_path / "case.cfg"
    cfgfile.write_text(
        "mode = swe\n"
        "x_hi = 4000.0\ny_hi = 4000.0\nmx = 10\nmy = 10\n"
        "bathymetry = flat:50\nic = gaussian:0.1:800:2000:2000\n"
        "bc_left = wall\nbc_right = wall\nbc_bottom = wall\nbc_top = wall\n"
        "t_end = 4.0\n")
    out = tmp_path / "filerun"
    assert main(["run", str(cfgfile), "--out", str(out)]) == 0
    assert (out / "frame_0000.txt").exists()


def test_run_usage_errors():
    assert main(["run", "no-such-scenario", "--out", "/tmp/x"]) == 2
    assert main(["run", "radial-flat", "--not-a-key"]) == 2
    assert main(["run", "radial-flat", "--frobnicate=3"]) == 2


def test_compare_self_is_zero(tmp_path, capsys):
    s = np.linspace(0.0, 100.0, 200)
    eta = np.exp(-((s - 60.0) / 10.0) ** 2)
    f = tmp_path / "t.csv"
    f.write_text("s,x,y,eta,h,B,level\n" + "\n".join(
        f"{si},{si},0,{ei},{ei + 50.0},-50,1" for si, ei in zip(s, eta)) + "\n")
    assert main(["compare", str(f), str(f)]) == 0
    report = dict(ln.split("=") for ln in
                  capsys.readouterr().out.strip().splitlines())
    assert float(report["l1"]) == 0.0
    assert float(report["linf"]) == 0.0
    assert float(report["peak_amplitude_error"]) == 0.0
    assert float(report["peak_location_error"]) == 0.0


def test_compare_missing_file_exits_2(tmp_path):
    f = tmp_path / "t.csv"
    f.write_text("s,x,y,eta,h,B,level\n0,0,0,0,1,-1,1\n")
    assert main(["compare", str(f), str(tmp_path / "absent.csv")]) == 2


def test_radial1d_writes_shared_transect_format(tmp_path):
    out = tmp_path / "ref"
    code = main(["radial1d", "radial-flat", "--out", str(out), "--n", "400",
                 "--t_end=5.0", "--output_times=5.0"])
    assert code == 0
    t0 = (out / "transect_0000.csv").read_text().splitlines()
    t1 = (out / "transect_0001.csv").read_text().splitlines()
    assert t0[0] == "s,x,y,eta,h,B,level"
    assert len(t0) == 401
    first = t0[1].split(",")
    assert float(first[0]) == pytest.approx(100.0)   # first cell center
    assert float(first[2]) == 0.0
    # after 5 s the hump has started to move: files differ
    assert t0 != t1


def test_usage_error_exit_code_via_subprocess():
    proc = subprocess.run([sys.executable, "-m", "sgnamr"],
                          capture_output=True, text=True)
    assert proc.returncode == 2
    proc = subprocess.run(
        [sys.executable, "-m", "sgnamr", "dispersion", "--points", "3"],
        capture_output=True, text=True)
    assert proc.returncode == 0
    assert proc.stdout.splitlines()[0] == "kh0,model,omega,scaled_group_velocity"
