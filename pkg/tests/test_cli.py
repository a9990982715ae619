import json
import math
import re

import numpy as np
import pytest

from filamentlab import cli
from filamentlab.dataio import dumps_json


def run_cli(args, tmp_path, monkeypatch=None, env_out=None):
    argv = list(args)
    if env_out is None:
        argv += ["--out-dir", str(tmp_path)]
    return cli.main(argv)


def read_run_json(tmp_path, sub):
    runs = list(tmp_path.glob(f"{sub}-*/run.json"))
    assert len(runs) == 1
    return json.loads(runs[0].read_text()), runs[0]


def test_angle_both_routes(tmp_path):
    rc = run_cli(["angle", "--a", "0.5", "--method", "both", "--smax", "400"], tmp_path)
    assert rc == 0
    data, _ = read_run_json(tmp_path, "angle")
    exact = math.exp(-math.pi * 0.25 / 2)
    assert data["closed_form"] == pytest.approx(exact, abs=1e-15)
    assert abs(data["ode_estimate"] - exact) <= 1e-3
    assert abs(data["theta_estimate"] - exact) <= 1e-3


def test_profile_zero_curvature_writes_line(tmp_path):
    rc = run_cli(["profile", "--a", "0", "--smax", "10"], tmp_path)
    assert rc == 0
    csvs = list(tmp_path.glob("profile-*/profile.csv"))
    assert len(csvs) == 1
    rows = np.genfromtxt(csvs[0], delimiter=",", names=True)
    assert np.max(np.abs(rows["y"])) < 1e-12
    assert np.max(np.abs(rows["z"])) < 1e-12
    assert np.max(np.abs(rows["x"] - rows["s"])) < 1e-12
    data, _ = read_run_json(tmp_path, "profile")
    assert data["intersections"] == []


def test_theta_command_fields(tmp_path):
    rc = run_cli(["theta", "--a", "0.5", "--smax", "200"], tmp_path)
    assert rc == 0
    data, _ = read_run_json(tmp_path, "theta")
    assert set(data) >= {"a", "s_max", "a1", "a1_spread", "energy_drift"}
    assert data["energy_drift"] <= 1e-8


def test_determinism_modulo_timestamp(tmp_path):
    args = ["angle", "--a", "0.3", "--method", "closed"]
    assert run_cli(args, tmp_path) == 0
    _, path = read_run_json(tmp_path, "angle")
    first = path.read_bytes()
    assert run_cli(args, tmp_path) == 0
    second = path.read_bytes()
    mask = re.compile(rb'"timestamp": "[^"]*"')
    assert mask.sub(b"T", first) == mask.sub(b"T", second)
    assert mask.search(first)


def test_spiral_command_metadata(tmp_path):
    rc = run_cli(["spiral", "--mu", "0.4", "--a", "0.5", "--smax", "15"], tmp_path)
    assert rc == 0
    data, _ = read_run_json(tmp_path, "spiral")
    assert data["nu"] == pytest.approx(-0.25, abs=1e-12)
    assert data["rotation_invariant_defect"] <= 1e-8
    assert data["unit_speed_defect"] <= 1e-8


def test_stability_command_writes_frames_and_report(tmp_path):
    rc = run_cli(
        ["stability", "--a", "0.5", "--uplus-norm", "0", "--smax", "3",
         "--ds", "0.05", "--n-steps", "400", "--n-slices", "12",
         "--tmin-factor", "1e-3"],
        tmp_path,
    )
    assert rc == 0
    data, path = read_run_json(tmp_path, "stability")
    for key in ("a", "t_grid", "cone_defect", "gamma_measured",
                "trace_constant", "sup_T_defect"):
        assert key in data
    assert data["trace_constant"] <= 1.5
    frames = list(path.parent.glob("frame_*.csv"))
    assert len(frames) == len(data["t_grid"])


def test_evolve_gp_const_datum(tmp_path):
    rc = run_cli(
        ["evolve", "--problem", "gp", "--a", "0.5", "--datum", "const",
         "--t0", "1", "--t1", "4", "--n-steps", "100", "--n-points", "256",
         "--length", "50"],
        tmp_path,
    )
    assert rc == 0
    data, path = read_run_json(tmp_path, "evolve")
    assert data["mass_drift"] <= 1e-10
    assert max(abs(e) for e in data["energy_series"]) < 1e-12
    fields = list(path.parent.glob("field_*.csv"))
    assert len(fields) >= 2


def test_usage_errors_exit_2(tmp_path, capsys):
    assert cli.main(["bogus"]) == 2
    err = capsys.readouterr().err
    assert err.startswith("error[usage]:")

    assert cli.main(["angle", "--nope", "1"]) == 2
    err = capsys.readouterr().err
    assert err.startswith("error[usage]:")


def test_validation_errors_exit_2(tmp_path, capsys):
    rc = run_cli(["profile", "--a", "-1", "--smax", "10"], tmp_path)
    assert rc == 2
    err = capsys.readouterr().err
    assert err.startswith("error[validation]:")
    assert "\n" not in err.strip("\n")


def test_config_file_and_flag_override(tmp_path):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("a = 0.7\nmethod = closed\n# comment\n")
    rc = cli.main(["angle", "--config", str(cfg), "--out-dir", str(tmp_path)])
    assert rc == 0
    data, _ = read_run_json(tmp_path, "angle")
    assert data["a"] == 0.7

    # flags override the file
    rc = cli.main(["angle", "--config", str(cfg), "--a", "0.2",
                   "--out-dir", str(tmp_path)])
    assert rc == 0
    runs = sorted(tmp_path.glob("angle-*/run.json"))
    values = {json.loads(p.read_text())["a"] for p in runs}
    assert 0.2 in values


def test_config_unknown_key_rejected(tmp_path, capsys):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("bogus = 1\n")
    rc = cli.main(["angle", "--config", str(cfg), "--out-dir", str(tmp_path)])
    assert rc == 2
    assert capsys.readouterr().err.startswith("error[usage]:")


def test_out_dir_env_var(tmp_path, monkeypatch):
    monkeypatch.setenv("FILAMENTLAB_OUT", str(tmp_path / "envout"))
    rc = cli.main(["angle", "--a", "0.4", "--method", "closed"])
    assert rc == 0
    assert list((tmp_path / "envout").glob("angle-*/run.json"))


def test_json_float_formatting():
    text = dumps_json({"x": 0.1, "arr": np.array([1.5, 2.0]), "n": 3})
    assert '"x": 0.10000000000000001' in text
    assert text.endswith("\n")
