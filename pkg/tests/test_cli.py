import json
import subprocess
import sys
from importlib import resources

import numpy as np
import pytest

from carfollow.cli import SCHEMAS, main, validate_config
from carfollow.io import read_json, read_trajectory_csv

SCENARIOS = resources.files("carfollow") / "scenarios"
P = {"a": 1.5, "b": 1.5, "v0": 20.0, "T": 1.0, "s0": 2.0, "lambda": 0.5, "d_c": 10.0}


def _write(tmp_path, cfg, name="cfg.json"):
    path = tmp_path / name
    path.write_text(json.dumps(cfg))
    return str(path)


def _sim_cfg(**extra):
    return {"params": P, "n_vehicles": 3, "leader": {"type": "sinusoid", "mean": 8.0, "amplitude": 1.0, "period": 30.0},
            "initial_gaps": 20.0, "initial_velocities": 8.0, "duration": 30.0,
            "gap_policy": {"p": 0.2, "d": 2.0}, **extra}


def _command_for(name):
    for prefix, cmd in (("start_up", "simulate"), ("case", "simulate"), ("ring", "ring"),
                        ("stability_map", "stability-map"), ("fundamental", "fundamental-diagram"),
                        ("calibration", "calibrate")):
        if name.startswith(prefix):
            return cmd
    return None


@pytest.mark.parametrize("path", sorted(p for p in SCENARIOS.iterdir() if p.name.endswith(".json")),
                         ids=lambda p: p.name)
def test_bundled_scenarios_validate(path):
    cmd = _command_for(path.name)
    if cmd is None:
        assert path.name == "fuel_coefficients_example.json"
        return
    validate_config(cmd, read_json(path))


@pytest.mark.parametrize("name,cmd", [("start_up_idm_d4.json", "simulate"),
                                      ("start_up_sigmoid_d4.json", "simulate"),
                                      ("fundamental_diagram_dc10.json", "fundamental-diagram"),
                                      ("calibration_quick.json", "calibrate")])
def test_quick_scenarios_run(name, cmd, tmp_path):
    out = tmp_path / "out"
    assert main([cmd, "--config", str(SCENARIOS / name), "--out", str(out), "--format", "csv+svg", "--quiet"]) == 0
    manifest = json.loads((out / "run.json").read_text())
    assert manifest["command"] == cmd
    for f in manifest["outputs"]:
        assert (out / f).exists()
    assert any(f.endswith(".svg") for f in manifest["outputs"])


def test_same_seed_same_bytes(tmp_path):
    cfg = _write(tmp_path, _sim_cfg())
    assert main(["simulate", "--config", cfg, "--out", str(tmp_path / "a"), "--seed", "9", "--quiet"]) == 0
    assert main(["simulate", "--config", cfg, "--out", str(tmp_path / "b"), "--seed", "9", "--quiet"]) == 0
    assert (tmp_path / "a" / "trajectory.csv").read_bytes() == (tmp_path / "b" / "trajectory.csv").read_bytes()
    assert main(["simulate", "--config", cfg, "--out", str(tmp_path / "c"), "--seed", "10", "--quiet"]) == 0
    assert (tmp_path / "a" / "trajectory.csv").read_bytes() != (tmp_path / "c" / "trajectory.csv").read_bytes()


def test_generated_seed_is_recorded_and_replays(tmp_path):
    cfg = _write(tmp_path, _sim_cfg())
    assert main(["simulate", "--config", cfg, "--out", str(tmp_path / "a"), "--quiet"]) == 0
    seed = json.loads((tmp_path / "a" / "run.json").read_text())["seed"]
    assert isinstance(seed, int)
    assert (tmp_path / "a" / "trajectory.csv").read_text().startswith(f"# seed={seed}\n")
    assert main(["simulate", "--config", cfg, "--out", str(tmp_path / "b"), "--seed", str(seed), "--quiet"]) == 0
    assert (tmp_path / "a" / "trajectory.csv").read_bytes() == (tmp_path / "b" / "trajectory.csv").read_bytes()


def test_unknown_key_is_a_config_error(tmp_path, capsys):
    cfg = _write(tmp_path, _sim_cfg(colour="red"))
    assert main(["simulate", "--config", cfg, "--out", str(tmp_path / "o")]) == 2
    assert "colour" in capsys.readouterr().err
    assert not (tmp_path / "o").exists()


def test_overfull_ring_is_a_config_error(tmp_path):
    cfg = _write(tmp_path, {"params": P, "length": 100.0, "n_vehicles": 20, "duration": 10.0})
    assert main(["ring", "--config", cfg, "--out", str(tmp_path / "o")]) == 2


def test_malformed_json_reports_position(tmp_path, capsys):
    path = tmp_path / "bad.json"
    path.write_text('{"params": {\n  "a": }')
    assert main(["simulate", "--config", str(path), "--out", str(tmp_path / "o")]) == 2
    assert "line 2" in capsys.readouterr().err


def test_missing_config_is_an_io_error(tmp_path):
    assert main(["simulate", "--config", str(tmp_path / "nope.json"), "--out", str(tmp_path / "o")]) == 4


def test_unwritable_output_is_an_io_error(tmp_path):
    cfg = _write(tmp_path, _sim_cfg())
    blocker = tmp_path / "file"
    blocker.write_text("x")
    assert main(["simulate", "--config", cfg, "--out", str(blocker / "sub"), "--seed", "1"]) == 4


def test_infeasible_calibration_is_a_numeric_failure(tmp_path):
    t = np.arange(0, 20, 0.1)
    rows = ["time,vehicle_id,position,velocity"]
    rows += [f"{ti},L,{10.0 - 30.0 * ti},0.0" for ti in t]
    rows += [f"{ti},F,0.0,30.0" for ti in t]
    (tmp_path / "d.csv").write_text("\n".join(rows) + "\n")
    cfg = _write(tmp_path, {"data": {"csv": "d.csv", "leader_id": "L", "follower_id": "F"},
                            "bounds": {"v0": [39.0, 40.0]}, "ga": {"population": 6, "generations": 1}})
    assert main(["calibrate", "--config", cfg, "--out", str(tmp_path / "o"), "--seed", "0"]) == 3


def test_calibrate_from_csv_recovers_report(tmp_path):
    sim = _write(tmp_path, {"params": P, "n_vehicles": 2, "leader": {"type": "piecewise", "times": [0, 10, 30],
                                                                      "speeds": [0, 10, 10]},
                            "initial_gaps": 5.0, "duration": 40.0}, name="sim.json")
    assert main(["simulate", "--config", sim, "--out", str(tmp_path / "s"), "--seed", "0", "--quiet"]) == 0
    bounds = {k: [v, v] for k, v in P.items()}
    cfg = _write(tmp_path, {"data": {"csv": "s/trajectory.csv", "leader_id": 0, "follower_id": 1},
                            "bounds": bounds, "ga": {"population": 4, "generations": 1}})
    assert main(["calibrate", "--config", cfg, "--out", str(tmp_path / "c"), "--quiet"]) == 0
    report = json.loads((tmp_path / "c" / "calibration.json").read_text())
    assert report["theils_u"] < 1e-9
    assert "lambda" in report["free"] and "lambda" in report["params"]


def test_stability_map_cases(tmp_path):
    out = tmp_path / "m"
    assert main(["stability-map", "--config", str(SCENARIOS / "stability_map_v0_78kmh.json"),
                 "--out", str(out), "--quiet"]) == 0
    text = (out / "cases.csv").read_text().splitlines()
    assert text[0].split(",")[-1] == "expected"
    assert len(text) == 5


def test_ring_sweep_and_single_run(tmp_path):
    base = {"params": P, "length": 300.0, "duration": 20.0, "window": 10.0, "seed": 0}
    cfg = _write(tmp_path, {**base, "sweep": {"n_vehicles": [10, 20], "init_modes": ["homogeneous", "jam"]}})
    assert main(["ring", "--config", cfg, "--out", str(tmp_path / "s"), "--quiet"]) == 0
    lines = [ln for ln in (tmp_path / "s" / "flow_density.csv").read_text().splitlines() if not ln.startswith("#")]
    assert len(lines) == 5
    cfg = _write(tmp_path, {**base, "n_vehicles": 10}, name="one.json")
    assert main(["ring", "--config", cfg, "--out", str(tmp_path / "r"), "--quiet"]) == 0
    series = read_trajectory_csv(tmp_path / "r" / "trajectory.csv")
    assert len(series) == 10


def test_metrics_and_fit_sigmoid(tmp_path):
    sim = _write(tmp_path, _sim_cfg(), name="sim.json")
    assert main(["simulate", "--config", sim, "--out", str(tmp_path / "a"), "--seed", "1", "--quiet"]) == 0
    assert main(["simulate", "--config", sim, "--out", str(tmp_path / "b"), "--seed", "2", "--quiet"]) == 0
    cfg = _write(tmp_path, {"observed": {"csv": "a/trajectory.csv", "vehicle_id": 2},
                            "simulated": {"csv": "b/trajectory.csv", "vehicle_id": 2},
                            "fuel_coefficients": str(SCENARIOS / "fuel_coefficients_example.json")})
    assert main(["metrics", "--config", cfg, "--out", str(tmp_path / "m"), "--quiet"]) == 0
    metrics = dict(ln.split(",") for ln in (tmp_path / "m" / "metrics.csv").read_text().splitlines()[1:])
    assert {"rmse_spacing", "theils_u_spacing", "fuel_total_observed", "jerk_rms_simulated"} <= set(metrics)
    x = np.linspace(0, 1, 30)
    y = 1.0 / (1.0 + np.exp(-8.0 * (x - 0.4)))
    cfg = _write(tmp_path, {"x": x.tolist(), "y": y.tolist()}, name="fit.json")
    assert main(["fit-sigmoid", "--config", cfg, "--out", str(tmp_path / "f"), "--format", "csv+svg", "--quiet"]) == 0
    row = (tmp_path / "f" / "sigmoid_fit.csv").read_text().splitlines()[1].split(",")
    assert float(row[1]) == pytest.approx(8.0, rel=1e-6)


def test_every_command_has_a_schema():
    from carfollow.cli import COMMANDS
    assert set(COMMANDS) == set(SCHEMAS)


def test_module_entry_point():
    res = subprocess.run([sys.executable, "-m", "carfollow", "--version"], capture_output=True, text=True)
    assert res.returncode == 0 and "carfollow" in res.stdout
