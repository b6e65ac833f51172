import hashlib
import json
import math

import numpy as np
import pytest

from ddr_escape.cli import main
from ddr_escape.core import GameParams, RealisticState
from ddr_escape.inverse import rasterize_partition
from ddr_escape.io import (TRAJECTORY_HEADER, ConfigError, ScenarioConfig,
                           parse_config, read_partition_csv, read_trajectory_csv,
                           render_partition_svg, serialize_config,
                           write_partition_csv)
from ddr_escape.simulator import OptimalEvader, OptimalPursuer, simulate

REF_CFG = """# reference scenario
v_r_max = 1
v_d_max = 0.6
b = 1
r_d = 2
s = 0.3
tau = 3.84
dt = 0.001
t_max = 10
"""

STATIONARY_CFG = """v_r_max = 1
v_d_max = 0
b = 1
r_d = 2
x_p = 0
y_p = 1
x_e = 0
y_e = 0
theta_e = 1.5707963267948966
t_max = 5
"""


def test_parse_config():
    cfg = parse_config(REF_CFG)
    assert cfg.params == GameParams(1.0, 0.6, 1.0, 2.0)
    assert (cfg.s, cfg.tau, cfg.dt, cfg.t_max) == (0.3, 3.84, 0.001, 10.0)
    assert cfg.initial is None
    cfg = parse_config(STATIONARY_CFG)
    assert cfg.initial == RealisticState(0, 1, 0, 0, math.pi / 2) and cfg.s is None
    assert cfg.dt == 1e-3


@pytest.mark.parametrize("text, needle", [
    ("v_r_max = 1\nspeed = 2\n", "line 2: unknown key 'speed'"),
    ("v_r_max = 1\nv_r_max = 2\n", "line 2: duplicate key"),
    ("v_r_max = fast\n", "line 1: v_r_max must be a number"),
    ("v_r_max 1\n", "line 1: expected 'key = value'"),
    ("v_r_max = 1\nv_d_max = 0.5\nb = 1\n", "missing required key(s): r_d"),
    ("v_r_max = 1\nv_d_max = 1.5\nb = 1\nr_d = 2\ns = 0.3\ntau = 1\n", "v_d_max"),
    ("v_r_max = 1\nv_d_max = 0.5\nb = 1\nr_d = 2\nx_p = 1\n", "incomplete initial state"),
    ("v_r_max = 1\nv_d_max = 0.5\nb = 1\nr_d = 2\n", "exactly one of"),
    ("v_r_max = 1\nv_d_max = 0.5\nb = 1\nr_d = 2\ns = 0.3\n", "s and tau"),
    ("v_r_max = 1\nv_d_max = 0.5\nb = 1\nr_d = 2\ns = 0.3\ntau = 1\ndt = 0\n", "dt"),
])
def test_config_errors(text, needle):
    with pytest.raises(ConfigError) as exc:
        parse_config(text)
    assert needle in str(exc.value)


def test_config_round_trip():
    for text in (REF_CFG, STATIONARY_CFG):
        once = serialize_config(parse_config(text))
        assert serialize_config(parse_config(once)) == once
        assert parse_config(once) == parse_config(text)


def test_scenario_config_requires_one_start():
    p = GameParams(1, 0.5, 1, 2)
    with pytest.raises(ConfigError):
        ScenarioConfig(p, RealisticState(0, 1, 0, 0, 0), 0.3, 1.0)


def test_cli_simulate_reference(tmp_path, capsys):
    cfg = tmp_path / "ref.cfg"
    cfg.write_text(REF_CFG)
    out, svg = tmp_path / "traj.csv", tmp_path / "traj.svg"
    assert main(["simulate", "--config", str(cfg), "--out", str(out), "--svg", str(svg)]) == 0
    assert "escape at t=3.83" in capsys.readouterr().out
    assert out.read_text().splitlines()[0] == ",".join(TRAJECTORY_HEADER)
    data = read_trajectory_csv(out)
    assert data["t"][-1] == pytest.approx(3.84, abs=0.02)
    assert set(data["phase"]) == {"primary", "rotation"}
    assert svg.read_text().lstrip().startswith("<?xml")

    # re-simulate from the first stored row
    first = RealisticState(*(data[k][0] for k in ("x_p", "y_p", "x_e", "y_e", "theta_e")))
    tr = simulate(first, OptimalEvader(), OptimalPursuer(), GameParams(1, 0.6, 1, 2),
                  1e-3, 10.0)
    assert tr.escape_time == pytest.approx(data["t"][-1], abs=5e-3)


def test_cli_simulate_stationary_and_truncated(tmp_path):
    cfg = tmp_path / "still.cfg"
    cfg.write_text(STATIONARY_CFG)
    out = tmp_path / "still.csv"
    assert main(["simulate", "--config", str(cfg), "--out", str(out)]) == 0
    assert read_trajectory_csv(out)["t"][-1] == pytest.approx(1.0, abs=1e-3)
    cfg.write_text(STATIONARY_CFG.replace("t_max = 5", "t_max = 0.5"))
    assert main(["simulate", "--config", str(cfg), "--out", str(out)]) == 2


def test_cli_config_error_names_invariant(tmp_path, capsys):
    cfg = tmp_path / "bad.cfg"
    cfg.write_text(REF_CFG.replace("v_d_max = 0.6", "v_d_max = 1.4"))
    assert main(["simulate", "--config", str(cfg)]) == 1
    err = capsys.readouterr().err
    assert "v_d_max" in err and "v_r_max" in err
    assert main(["simulate", "--config", str(tmp_path / "missing.cfg")]) == 1


def test_cli_partition(tmp_path, capsys):
    out = tmp_path / "part.csv"
    assert main(["partition", "--rho-v", "0.2", "--rho-l", "4", "--resolution", "16",
                 "--out", str(out)]) == 0
    doc = json.loads(capsys.readouterr().out)
    assert doc["resolution"] == 16
    codes = read_partition_csv(out)
    assert codes.shape == (16, 16) and set(np.unique(codes)) <= {0, 1, 2, 3, 4}
    assert out.with_suffix(".svg").exists()
    assert main(["partition", "--resolution", "8", "--out", str(out)]) == 1


def test_partition_files_are_deterministic(tmp_path):
    pm = rasterize_partition(GameParams.from_ratios(0.6, 2), 32)
    digests = set()
    for k in range(2):
        write_partition_csv(pm, tmp_path / f"p{k}.csv")
        render_partition_svg(pm, tmp_path / f"p{k}.svg")
        digests.add(hashlib.md5((tmp_path / f"p{k}.svg").read_bytes()).hexdigest())
    assert len(digests) == 1
    assert (tmp_path / "p0.csv").read_bytes() == (tmp_path / "p1.csv").read_bytes()
    assert np.array_equal(read_partition_csv(tmp_path / "p0.csv"), pm.codes)


def test_cli_synthesize(capsys):
    assert main(["synthesize", "--rho-v", "0.6", "--rho-l", "2", "--x", "0", "--y", "1.6"]) == 0
    doc = json.loads(capsys.readouterr().out)
    assert doc["tau"] == pytest.approx(1.0) and doc["phase"] == "primary"
    assert main(["synthesize", "--x", "3", "--y", "0"]) == 1
    assert main(["synthesize", "--x", "1"]) == 1


def test_cli_verify(tmp_path):
    out = tmp_path / "report.json"
    args = ["verify", "--rho-v", "0.6", "--rho-l", "2", "--s", "0.3", "--dt", "1e-3"]
    assert main(args + ["--out", str(out)]) == 0
    assert json.loads(out.read_text())["passed"] is True
    assert main(args + ["--tol", "1e-15"]) == 3
