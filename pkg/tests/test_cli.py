import csv
import json
from pathlib import Path

import pytest

from rg2flow import cli
from rg2flow.cli import ScenarioConfig
from rg2flow.errors import ConfigError

SCENARIOS = Path(__file__).resolve().parents[1] / "scenarios"

SPHERE = """
name = "sphere"
[geometry]
kind = "constant_curvature"
n = 3
K = 1.0
[density]
f = 2.9826069522587457
[run]
dt = 1e-3
steps = 5
"""


def write(tmp_path, text, name="case.toml"):
    p = tmp_path / name
    p.write_text(text)
    return p


@pytest.mark.parametrize(
    "data, path",
    [
        ({"geometry": {"kind": "constant_curvature", "n": 3, "K": 1.0}, "colour": 1}, "colour"),
        ({"geometry": {"kind": "warped_torus", "N": 32, "rho": {"mean": 1, "tan": [1]}}}, "geometry.rho.tan"),
        ({"geometry": {"kind": "constant_curvature", "n": 3, "K": 1.0}, "run": {"mode": "fast"}}, "run.mode"),
        ({"geometry": {"kind": "constant_curvature", "n": 3, "K": 1.0}, "run": {"mode": "plain"}}, "run.alpha"),
        ({"geometry": {"kind": "constant_curvature", "n": 3, "K": 1.0}, "run": {"alpha": 1.0}}, "run.alpha"),
        ({"geometry": {"kind": "constant_curvature", "n": 3, "K": 1.0}, "run": {"steps": 0}}, "run.steps"),
        ({"geometry": {"kind": "constant_curvature", "n": 3, "K": 1.0}, "run": {"dt": 0.1, "steps": 5, "T0": 0.2}}, "run.steps"),
        ({"geometry": {"kind": "constant_curvature", "n": 3, "K": 1.0}, "verify": {"scaling": [2.0, -1.0]}}, "verify.scaling[1]"),
        ({"run": {}}, "geometry"),
    ],
)
def test_config_errors_name_the_field(data, path):
    with pytest.raises(ConfigError) as exc:
        ScenarioConfig.from_dict(data)
    assert exc.value.path == path


def test_build_state_rejects_bad_fields():
    cfg = ScenarioConfig.from_dict({"geometry": {"kind": "homogeneous3", "structure": [2, 2, 2], "coeffs": [1, 1, 1]},
                                    "drift": {"harmonic": 0.1}})
    with pytest.raises(ConfigError) as exc:
        cli.build_state(cfg)
    assert exc.value.path == "drift.harmonic"
    cfg = ScenarioConfig.from_dict({"geometry": {"kind": "constant_curvature", "n": 3}})
    with pytest.raises(ConfigError) as exc:
        cli.build_state(cfg)
    assert exc.value.path == "geometry.K"
    cfg = ScenarioConfig.from_dict({"geometry": {"kind": "constant_curvature", "n": 3, "K": 1.0},
                                    "density": {"f": {"mean": 0.0, "cos": [0.1]}}})
    with pytest.raises(ConfigError):
        cli.build_state(cfg)


def test_flow_command_writes_tables(tmp_path, capsys):
    cfg = write(tmp_path, SPHERE)
    out = tmp_path / "out"
    assert cli.main(["flow", "--config", str(cfg), "--out", str(out)]) == 0
    assert "wall time" in capsys.readouterr().out
    rows = list(csv.DictReader((out / "trajectory.csv").open()))
    assert len(rows) == 6 and rows[0]["t"] == "0"
    assert set(rows[0]) >= {"sigma", "alpha_g", "margin", "N", "F_ext"}
    ent = list(csv.DictReader((out / "entropy.csv").open()))
    assert float(ent[-1]["N_production"]) > 0
    assert (out / "entropy.dat").read_text().startswith("# t F F_ext RHS_bound")
    man = json.loads((out / "manifest.json").read_text())
    assert man["command"] == "flow" and man["halted"] is None
    assert "wall" not in json.dumps(man)
    assert not (out / "HALTED").exists()


def test_verify_and_eigen_commands(tmp_path):
    out = tmp_path / "v"
    assert cli.main(["verify", "--config", str(SCENARIOS / "sphere_scaling.toml"), "--out", str(out)]) == 0
    ver = json.loads((out / "verification.json").read_text())
    assert ver["scaling"]["pass"] and ver["eigen"]["pass"] and ver["harnack"]["pass"]
    out = tmp_path / "e"
    assert cli.main(["eigen", "--config", str(SCENARIOS / "flat_torus_stationary.toml"), "--out", str(out)]) == 0
    eig = json.loads((out / "eigen.json").read_text())
    assert eig["pass"] and eig["Lambda"] >= eig["lower_bound"]


def test_failed_check_exits_with_two(tmp_path):
    cfg = write(tmp_path, SPHERE + "[verify]\ntolerance = -1e9\n")
    assert cli.main(["entropy", "--config", str(cfg), "--out", str(tmp_path / "o")]) == 2


def test_config_error_exits_with_one(tmp_path, capsys):
    cfg = write(tmp_path, SPHERE.replace("steps = 5", "steps = 5\nspeed = 2"))
    assert cli.main(["flow", "--config", str(cfg), "--out", str(tmp_path / "o")]) == 1
    assert "run.speed" in capsys.readouterr().err
    assert cli.main(["flow", "--config", str(tmp_path / "missing.toml"), "--out", str(tmp_path / "o")]) == 1


def test_runtime_error_leaves_halted_marker(tmp_path):
    text = SPHERE.replace('f = 2.9826069522587457', 'f = -3.0')  # coupling far beyond the window
    text = text.replace("K = 1.0", "K = -1.0\nref_volume = 1.0")
    out = tmp_path / "o"
    assert cli.main(["flow", "--config", str(write(tmp_path, text)), "--out", str(out)]) == 1
    assert "NotParabolicError" in (out / "HALTED").read_text()
    assert json.loads((out / "manifest.json").read_text())["halted"].startswith("NotParabolicError")


def test_batch_reports_each_scenario(tmp_path):
    good = write(tmp_path, SPHERE, "good.toml")
    bad = write(tmp_path, SPHERE.replace("K = 1.0", "K = 1.0\nshape = 1"), "bad.toml")
    batch = write(tmp_path, f'scenarios = ["{good.name}", "{bad.name}"]\n', "batch.toml")
    assert cli.main(["batch", "--config", str(batch), "--out", str(tmp_path / "b")]) == 1
    summary = json.loads((tmp_path / "b" / "batch_summary.json").read_text())
    assert [s["exit_code"] for s in summary] == [0, 1]
    assert "geometry.shape" in summary[1]["error"]
    bad_batch = write(tmp_path, 'scenarios = []\nthreads = 2\n', "batch2.toml")
    assert cli.main(["batch", "--config", str(bad_batch), "--out", str(tmp_path / "c")]) == 1


def test_parser_requires_command():
    with pytest.raises(SystemExit):
        cli.build_parser().parse_args([])
