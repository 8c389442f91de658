"""``carfollow`` command-line interface.

Every command reads a JSON config (validated before any computation), writes
its results under ``--out`` and a ``run.json`` manifest recording the seed.

Exit codes: 0 ok, 2 configuration error, 3 numerical failure, 4 I/O error.
"""
from __future__ import annotations

import argparse
import csv
import logging
import sys
from pathlib import Path

import numpy as np
from jsonschema import Draft202012Validator

from . import __version__, svg
from .equilibrium import equilibrium_spacing, fundamental_diagram
from .estimation import (CalibrationProblem, FuelCoefficients, GASettings, calibrate_ga, fit_sigmoid,
                         jerk_series, load_fuel_coefficients, minmax_normalize, rmse,
                         stop_and_go_leader, synthetic_problem, theils_u)
from .estimation.fuel import fuel_rate
from .io import (ConfigError, read_json, read_trajectory_csv, write_csv, write_json,
                 write_trajectory_csv, atomic_write_text)
from .model import ModelParams, RandomGapPolicy
from .simulation import (ConstantLeader, PiecewiseLeader, PlatoonConfig, RecordedLeader, RingConfig,
                         SimulationError, SinusoidLeader, StationaryLeader, measure_flow_density,
                         simulate_platoon, simulate_ring, spacing_velocity_loop)
from .stability import stability_map

log = logging.getLogger("carfollow")

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC, EXIT_IO = 0, 2, 3, 4

# --------------------------------------------------------------------------
# schemas

NUM = {"type": "number"}
POS = {"type": "number", "exclusiveMinimum": 0}
NONNEG = {"type": "number", "minimum": 0}
MODEL = {"enum": ["idm", "sigmoid_idm"]}
PARAMS = {
    "type": "object",
    "properties": {"a": POS, "b": POS, "v0": POS, "T": POS, "s0": POS,
                   "delta": {"type": "number", "minimum": 1}, "lambda": NONNEG, "d_c": NONNEG},
    "required": ["a", "b", "v0", "T", "s0"],
    "additionalProperties": False,
}
PARAMS_OR_LIST = {"oneOf": [PARAMS, {"type": "array", "items": PARAMS, "minItems": 1}]}
GRID = {"oneOf": [
    {"type": "array", "items": NUM, "minItems": 1},
    {"type": "object", "properties": {"start": NUM, "stop": NUM, "num": {"type": "integer", "minimum": 1}},
     "required": ["start", "stop", "num"], "additionalProperties": False},
]}
GAP_POLICY = {
    "type": "object",
    "properties": {"p": {"type": "number", "minimum": 0, "maximum": 1}, "d": NONNEG,
                   "r_mode": {"enum": ["negative", "zero", "positive", "symmetric"]}, "floor": NONNEG},
    "required": ["p", "d"],
    "additionalProperties": False,
}
LEADER = {"oneOf": [
    {"type": "object", "properties": {"type": {"const": "stationary"}}, "required": ["type"],
     "additionalProperties": False},
    {"type": "object", "properties": {"type": {"const": "constant"}, "speed": NONNEG},
     "required": ["type", "speed"], "additionalProperties": False},
    {"type": "object", "properties": {"type": {"const": "piecewise"},
                                      "times": {"type": "array", "items": NUM, "minItems": 1},
                                      "speeds": {"type": "array", "items": NONNEG, "minItems": 1}},
     "required": ["type", "times", "speeds"], "additionalProperties": False},
    {"type": "object", "properties": {"type": {"const": "sinusoid"}, "mean": NONNEG, "amplitude": NUM,
                                      "period": POS, "start": NONNEG},
     "required": ["type", "mean", "amplitude", "period"], "additionalProperties": False},
    {"type": "object", "properties": {"type": {"const": "recorded"}, "csv": {"type": "string"},
                                      "vehicle_id": {"type": ["string", "integer"]}},
     "required": ["type", "csv", "vehicle_id"], "additionalProperties": False},
]}
COMMON_RUN = {
    "description": {"type": "string"},
    "seed": {"type": "integer", "minimum": 0},
    "model": {"oneOf": [MODEL, {"type": "array", "items": MODEL, "minItems": 1}]},
    "params": PARAMS_OR_LIST,
    "duration": POS,
    "dt": POS,
    "vehicle_length": POS,
    "velocity_clamp": {"type": "boolean"},
    "on_collision": {"enum": ["halt", "continue"]},
    "integrator": {"enum": ["ballistic", "euler"]},
    "gap_policy": GAP_POLICY,
}
SCHEMAS = {
    "simulate": {
        "type": "object",
        "properties": {
            **COMMON_RUN,
            "n_vehicles": {"type": "integer", "minimum": 2},
            "leader": LEADER,
            "initial_gaps": {"oneOf": [POS, {"type": "array", "items": POS}, {"const": "equilibrium"}]},
            "initial_velocities": {"oneOf": [NONNEG, {"type": "array", "items": NONNEG}]},
            "loop_vehicle": {"type": "integer", "minimum": 1},
        },
        "required": ["params", "leader", "duration"],
        "additionalProperties": False,
    },
    "ring": {
        "type": "object",
        "properties": {
            **COMMON_RUN,
            "length": POS,
            "n_vehicles": {"type": "integer", "minimum": 1},
            "init_mode": {"enum": ["homogeneous", "jam"]},
            "v_init": NONNEG,
            "jam_gap": POS,
            "perturbation": NUM,
            "window": POS,
            "sweep": {"type": "object",
                      "properties": {"n_vehicles": {"type": "array", "items": {"type": "integer", "minimum": 1},
                                                    "minItems": 1},
                                     "init_modes": {"type": "array", "items": {"enum": ["homogeneous", "jam"]},
                                                    "minItems": 1}},
                      "required": ["n_vehicles"], "additionalProperties": False},
        },
        "required": ["params", "length", "duration"],
        "additionalProperties": False,
    },
    "stability-map": {
        "type": "object",
        "properties": {
            "description": {"type": "string"},
            "seed": {"type": "integer", "minimum": 0},
            "context": PARAMS,
            "v_e": NONNEG,
            "lambda_grid": GRID,
            "d_c_grid": GRID,
            "cases": {"type": "array", "items": {
                "type": "object",
                "properties": {"name": {"type": "string"}, "lambda": NONNEG, "d_c": NONNEG,
                               "expected": {"enum": ["stable", "string_unstable", "locally_unstable"]}},
                "required": ["name", "lambda", "d_c"], "additionalProperties": False}},
        },
        "required": ["context", "v_e", "lambda_grid", "d_c_grid"],
        "additionalProperties": False,
    },
    "fundamental-diagram": {
        "type": "object",
        "properties": {
            "description": {"type": "string"},
            "seed": {"type": "integer", "minimum": 0},
            "model": MODEL,
            "params": PARAMS,
            "vehicle_length": POS,
            "v_grid": GRID,
            "n_free": {"type": "integer", "minimum": 1},
        },
        "required": ["params"],
        "additionalProperties": False,
    },
    "calibrate": {
        "type": "object",
        "properties": {
            "description": {"type": "string"},
            "seed": {"type": "integer", "minimum": 0},
            "model": MODEL,
            "data": {"oneOf": [
                {"type": "object", "properties": {"csv": {"type": "string"},
                                                  "leader_id": {"type": ["string", "integer"]},
                                                  "follower_id": {"type": ["string", "integer"]}},
                 "required": ["csv", "leader_id", "follower_id"], "additionalProperties": False},
                {"type": "object", "properties": {"synthetic": {
                    "type": "object",
                    "properties": {"params": PARAMS,
                                   "leader": {"type": "object", "additionalProperties": False,
                                              "properties": {"duration": POS, "dt": POS, "v_high": POS,
                                                             "accel": POS, "decel": POS, "cruise": NONNEG,
                                                             "stop": NONNEG}},
                                   "initial_gap": POS, "initial_velocity": NONNEG},
                    "required": ["params"], "additionalProperties": False}},
                 "required": ["synthetic"], "additionalProperties": False},
            ]},
            "bounds": {"type": "object", "additionalProperties": {"type": "array", "items": NUM,
                                                                  "minItems": 2, "maxItems": 2}},
            "fixed": {"type": "object", "additionalProperties": NUM},
            "free": {"type": "array", "items": {"type": "string"}},
            "ga": {"type": "object", "additionalProperties": False, "properties": {
                "population": {"type": "integer", "minimum": 2},
                "generations": {"type": "integer", "minimum": 0},
                "crossover_rate": NONNEG, "mutation_rate": NONNEG, "mutation_scale": NONNEG,
                "elitism": {"type": "integer", "minimum": 0}, "tournament": {"type": "integer", "minimum": 1},
                "blx_alpha": NONNEG, "stall_generations": {"type": "integer", "minimum": 1},
                "tol": NONNEG, "polish": {"type": "boolean"}}},
            "vehicle_length": POS,
            "velocity_clamp": {"type": "boolean"},
        },
        "required": ["data"],
        "additionalProperties": False,
    },
    "metrics": {
        "type": "object",
        "properties": {
            "description": {"type": "string"},
            "seed": {"type": "integer", "minimum": 0},
            "observed": {"$ref": "#/$defs/series"},
            "simulated": {"$ref": "#/$defs/series"},
            "fuel_coefficients": {"type": "string"},
        },
        "required": ["observed", "simulated"],
        "additionalProperties": False,
        "$defs": {"series": {"type": "object",
                             "properties": {"csv": {"type": "string"},
                                            "vehicle_id": {"type": ["string", "integer"]}},
                             "required": ["csv", "vehicle_id"], "additionalProperties": False}},
    },
    "fit-sigmoid": {
        "type": "object",
        "properties": {
            "description": {"type": "string"},
            "seed": {"type": "integer", "minimum": 0},
            "x": {"type": "array", "items": NUM, "minItems": 4},
            "y": {"type": "array", "items": NUM, "minItems": 4},
            "csv": {"type": "string"},
            "x_column": {"type": "string"},
            "y_column": {"type": "string"},
            "normalize": {"type": "boolean"},
        },
        "oneOf": [{"required": ["x", "y"]}, {"required": ["csv"]}],
        "additionalProperties": False,
    },
}


def validate_config(command: str, config) -> dict:
    """Schema check; the first error is reported with its JSON path."""
    validator = Draft202012Validator(SCHEMAS[command])
    errors = sorted(validator.iter_errors(config), key=lambda e: list(e.absolute_path))
    if errors:
        err = errors[0]
        where = "/".join(str(p) for p in err.absolute_path) or "<root>"
        raise ConfigError(f"config field '{where}': {err.message}")
    return config


# --------------------------------------------------------------------------
# config helpers

def _params(obj):
    if isinstance(obj, list):
        return [ModelParams.from_dict(p) for p in obj]
    return ModelParams.from_dict(obj)


def _grid(spec):
    if isinstance(spec, dict):
        return np.linspace(spec["start"], spec["stop"], spec["num"])
    return np.asarray(spec, dtype=float)


def _policy(cfg):
    gp = cfg.get("gap_policy")
    return None if gp is None else RandomGapPolicy(**gp)


def _resolve(base: Path, rel: str) -> Path:
    p = Path(rel)
    return p if p.is_absolute() else base / p


def _leader(spec, base):
    kind = spec["type"]
    if kind == "stationary":
        return StationaryLeader()
    if kind == "constant":
        return ConstantLeader(spec["speed"])
    if kind == "piecewise":
        return PiecewiseLeader(tuple(spec["times"]), tuple(spec["speeds"]))
    if kind == "sinusoid":
        return SinusoidLeader(spec["mean"], spec["amplitude"], spec["period"], spec.get("start", 0.0))
    series = read_trajectory_csv(_resolve(base, spec["csv"]))
    s = series.get(str(spec["vehicle_id"]))
    if s is None:
        raise ConfigError(f"leader vehicle_id {spec['vehicle_id']!r} not found in {spec['csv']}")
    return RecordedLeader(s.time - s.time[0], s.position, s.velocity)


def _run_kwargs(cfg, seed):
    out = {"seed": seed, "gap_policy": _policy(cfg)}
    for key in ("model", "duration", "dt", "vehicle_length", "velocity_clamp", "on_collision", "integrator"):
        if key in cfg:
            out[key] = cfg[key]
    return out


# --------------------------------------------------------------------------
# commands; each returns the list of files written

def cmd_simulate(cfg, out: Path, seed, fmt, base) -> list:
    params = _params(cfg["params"])
    n = cfg.get("n_vehicles", 2)
    gaps = cfg.get("initial_gaps", 10.0)
    vel = cfg.get("initial_velocities", 0.0)
    if gaps == "equilibrium":
        model = cfg.get("model", "sigmoid_idm")
        if not isinstance(model, str) or isinstance(params, list):
            raise ConfigError("initial_gaps='equilibrium' needs a single model and parameter set")
        if not np.isscalar(vel):
            raise ConfigError("initial_gaps='equilibrium' needs a scalar initial velocity")
        gaps = float(equilibrium_spacing(model, vel, params))
    config = PlatoonConfig(n_vehicles=n, params=params, leader=_leader(cfg["leader"], base),
                           initial_gaps=gaps, initial_velocities=vel, **_run_kwargs(cfg, seed))
    traj = simulate_platoon(config)
    files = [write_trajectory_csv(out / "trajectory.csv", traj, comments=[f"seed={seed}"])]
    events = [[str(e.step), repr(float(e.time)), str(e.vehicle), e.kind] for e in traj.events]
    files.append(write_csv(out / "events.csv", ["step", "time", "vehicle_id", "kind"], events))
    if fmt == "csv+svg":
        ids = range(traj.n_vehicles)
        files.append(atomic_write_text(out / "velocity.svg", svg.line_chart(
            [traj.time] * traj.n_vehicles, [traj.velocity[:, i] for i in ids],
            labels=[f"vehicle {i}" for i in ids][:8], title="velocity", xlabel="time (s)",
            ylabel="velocity (m/s)")))
        files.append(atomic_write_text(out / "space_time.svg", svg.space_time_chart(traj)))
        veh = cfg.get("loop_vehicle", 1)
        if veh < traj.n_vehicles:
            loop = spacing_velocity_loop(traj, veh)
            files.append(atomic_write_text(out / "spacing_velocity.svg", svg.line_chart(
                [loop.gap], [loop.velocity], title=f"vehicle {veh} spacing-velocity loop "
                f"(coasting {loop.coasting_fraction:.0%})", xlabel="gap (m)", ylabel="velocity (m/s)")))
    return files


def cmd_ring(cfg, out: Path, seed, fmt, base) -> list:
    params = _params(cfg["params"])
    extra = {k: cfg[k] for k in ("v_init", "jam_gap", "perturbation") if k in cfg}
    window = cfg.get("window", min(300.0, cfg["duration"]))
    sweep = cfg.get("sweep")
    files = []
    if sweep is None:
        ring = RingConfig(length=cfg["length"], n_vehicles=cfg.get("n_vehicles", 20), params=params,
                          init_mode=cfg.get("init_mode", "homogeneous"), **extra, **_run_kwargs(cfg, seed))
        traj = simulate_ring(ring)
        fd = measure_flow_density(traj, ring, min(window, traj.duration))
        files.append(write_trajectory_csv(out / "trajectory.csv", traj, comments=[f"seed={seed}"]))
        files.append(write_csv(out / "flow_density.csv",
                               ["n_vehicles", "init_mode", "density", "flow", "speed", "collisions"],
                               [[str(ring.n_vehicles), ring.init_mode, fd.density, fd.flow, fd.speed,
                                 str(len(traj.events_of("collision")))]],
                               comments=[f"seed={seed}"]))
        if fmt == "csv+svg":
            files.append(atomic_write_text(out / "space_time.svg", svg.space_time_chart(traj)))
        return files

    modes = sweep.get("init_modes", ["homogeneous", "jam"])
    rows, series = [], {m: ([], []) for m in modes}
    for run_index, n in enumerate(sweep["n_vehicles"]):
        for mode in modes:
            ring = RingConfig(length=cfg["length"], n_vehicles=n, params=params, init_mode=mode, **extra,
                              **{**_run_kwargs(cfg, seed), "seed": None if seed is None else seed ^ run_index})
            traj = simulate_ring(ring)
            fd = measure_flow_density(traj, ring, min(window, traj.duration))
            rows.append([str(n), mode, fd.density, fd.flow, fd.speed, str(len(traj.events_of("collision")))])
            series[mode][0].append(fd.density * 1000)
            series[mode][1].append(fd.flow * 3600)
            log.info("n=%d %s: rho=%.4f veh/m, Q=%.1f veh/h", n, mode, fd.density, fd.flow * 3600)
    files.append(write_csv(out / "flow_density.csv",
                           ["n_vehicles", "init_mode", "density", "flow", "speed", "collisions"], rows,
                           comments=[f"seed={seed}"]))
    if fmt == "csv+svg":
        files.append(atomic_write_text(out / "flow_density.svg", svg.scatter_chart(
            [series[m][0] for m in modes], [series[m][1] for m in modes], labels=modes,
            title="flow-density", xlabel="density (veh/km)", ylabel="flow (veh/h)", radius=3.5)))
    return files


CLASS_COLORS = {"stable": "#ffffff", "string_unstable": "#f4a6c0", "locally_unstable": "#7b2d43"}


def cmd_stability_map(cfg, out: Path, seed, fmt, base) -> list:
    context = ModelParams.from_dict(cfg["context"])
    smap = stability_map(context, cfg["v_e"], _grid(cfg["lambda_grid"]), _grid(cfg["d_c_grid"]))
    rows = []
    for i, lam in enumerate(smap.lam_grid):
        for j, dc in enumerate(smap.dc_grid):
            rows.append([float(lam), float(dc), smap.s_e[i, j], smap.criterion[i, j],
                         smap.classification[i, j], str(bool(smap.quasi[i, j])).lower(),
                         str(bool(smap.boundary[i, j])).lower()])
    header = ["lambda", "d_c", "s_e", "criterion", "classification", "quasi", "boundary"]
    files = [write_csv(out / "stability_map.csv", header, rows)]
    if cfg.get("cases"):
        case_rows = []
        for case in cfg["cases"]:
            cell = stability_map(context, cfg["v_e"], [case["lambda"]], [case["d_c"]]).cell(case["lambda"], case["d_c"])
            case_rows.append([case["name"], cell["lambda"], cell["d_c"], cell["s_e"], cell["criterion"],
                              cell["classification"], str(cell["quasi"]).lower(), case.get("expected", "")])
        files.append(write_csv(out / "cases.csv", ["name", "lambda", "d_c", "s_e", "criterion",
                                                   "classification", "quasi", "expected"], case_rows))
    if fmt == "csv+svg":
        files.append(atomic_write_text(out / "stability_map.svg", svg.heatmap_chart(
            smap.dc_grid, smap.lam_grid, smap.classification, CLASS_COLORS,
            title=f"string stability at v_e = {cfg['v_e']:.3f} m/s", xlabel="d_c (m)", ylabel="lambda (1/m)")))
    return files


def cmd_fundamental_diagram(cfg, out: Path, seed, fmt, base) -> list:
    params = ModelParams.from_dict(cfg["params"])
    v_grid = _grid(cfg["v_grid"]) if "v_grid" in cfg else None
    fd = fundamental_diagram(params, cfg.get("model", "sigmoid_idm"), cfg.get("vehicle_length", 5.0),
                             v_grid=v_grid, n_free=cfg.get("n_free", 20))
    rows = [[fd.density[k], fd.flow[k], fd.speed[k], fd.spacing[k], fd.branch[k]] for k in range(fd.density.size)]
    files = [write_csv(out / "fundamental_diagram.csv", ["density", "flow", "speed", "spacing", "branch"], rows)]
    if fmt == "csv+svg":
        rho = fd.density * 1000
        files.append(atomic_write_text(out / "flow_density.svg", svg.line_chart(
            [rho], [fd.flow * 3600], title="flow-density", xlabel="density (veh/km)", ylabel="flow (veh/h)")))
        files.append(atomic_write_text(out / "speed_density.svg", svg.line_chart(
            [rho], [fd.speed], title="speed-density", xlabel="density (veh/km)", ylabel="speed (m/s)")))
        eq = fd.branch != "free_ray"
        files.append(atomic_write_text(out / "spacing_velocity.svg", svg.line_chart(
            [fd.spacing[eq]], [fd.speed[eq]], title="equilibrium spacing", xlabel="spacing (m)",
            ylabel="speed (m/s)")))
    return files


def _gene(name: str) -> str:
    return "lam" if name == "lambda" else name


def _public(name: str) -> str:
    return "lambda" if name == "lam" else name


def _calibration_problem(cfg, seed, base):
    model = cfg.get("model", "sigmoid_idm")
    ga = GASettings(**cfg.get("ga", {}))
    bounds = {_gene(k): tuple(v) for k, v in cfg.get("bounds", {}).items()}
    fixed = {_gene(k): v for k, v in cfg.get("fixed", {"delta": 4.0}).items()}
    common = dict(model=model, bounds=bounds, fixed=fixed, ga=ga, seed=seed,
                  vehicle_length=cfg.get("vehicle_length", 5.0), velocity_clamp=cfg.get("velocity_clamp", True))
    if "free" in cfg:
        common["free"] = tuple(_gene(k) for k in cfg["free"])
    data = cfg["data"]
    if "synthetic" in data:
        syn = data["synthetic"]
        leader = stop_and_go_leader(**syn.get("leader", {}))
        return synthetic_problem(ModelParams.from_dict(syn["params"]), leader=leader,
                                 initial_gap=syn.get("initial_gap", 5.0),
                                 initial_velocity=syn.get("initial_velocity", 0.0), **common)
    series = read_trajectory_csv(_resolve(base, data["csv"]))
    lead, fol = series.get(str(data["leader_id"])), series.get(str(data["follower_id"]))
    if lead is None or fol is None:
        raise ConfigError("leader_id/follower_id not present in the trajectory file")
    if lead.time.shape != fol.time.shape or not np.allclose(lead.time, fol.time):
        raise ConfigError("leader and follower must share the same time stamps")
    gap = fol.gap if fol.gap is not None else lead.position - fol.position - common["vehicle_length"]
    return CalibrationProblem(fol.time - fol.time[0], lead.position, lead.velocity, gap, fol.velocity, **common)


def cmd_calibrate(cfg, out: Path, seed, fmt, base) -> list:
    problem = _calibration_problem(cfg, seed, base)
    res = calibrate_ga(problem)
    report = {**res.report(), "model": problem.model, "free": [_public(k) for k in problem.free],
              "bounds": {_public(k): list(v) for k, v in problem.bounds.items()}}
    files = [write_json(out / "calibration.json", report)]
    rows = [[t, g_o, g_s, v_o, v_s] for t, g_o, g_s, v_o, v_s in
            zip(problem.time, problem.follower_gap, res.run.gap, problem.follower_velocity, res.run.velocity)]
    files.append(write_csv(out / "calibration_fit.csv",
                           ["time", "gap_observed", "gap_simulated", "velocity_observed", "velocity_simulated"],
                           rows, comments=[f"seed={seed}"]))
    if fmt == "csv+svg":
        files.append(atomic_write_text(out / "calibration_spacing.svg", svg.line_chart(
            [problem.time, problem.time], [problem.follower_gap, res.run.gap], labels=["observed", "simulated"],
            title=f"spacing, U = {res.fitness:.2e}", xlabel="time (s)", ylabel="gap (m)")))
        files.append(atomic_write_text(out / "calibration_velocity.svg", svg.line_chart(
            [problem.time, problem.time], [problem.follower_velocity, res.run.velocity],
            labels=["observed", "simulated"], title="velocity", xlabel="time (s)", ylabel="velocity (m/s)")))
    return files


def _series(spec, base):
    series = read_trajectory_csv(_resolve(base, spec["csv"]))
    s = series.get(str(spec["vehicle_id"]))
    if s is None:
        raise ConfigError(f"vehicle_id {spec['vehicle_id']!r} not found in {spec['csv']}")
    return s


def cmd_metrics(cfg, out: Path, seed, fmt, base) -> list:
    obs, sim = _series(cfg["observed"], base), _series(cfg["simulated"], base)
    if obs.time.shape != sim.time.shape:
        raise ConfigError("observed and simulated series differ in length")
    rows = []
    if obs.gap is not None and sim.gap is not None:
        rows.append(["rmse_spacing", rmse(obs.gap, sim.gap)])
        rows.append(["theils_u_spacing", theils_u(obs.gap, sim.gap)])
    rows.append(["rmse_velocity", rmse(obs.velocity, sim.velocity)])
    coeffs: FuelCoefficients | None = None
    if "fuel_coefficients" in cfg:
        coeffs = load_fuel_coefficients(_resolve(base, cfg["fuel_coefficients"]))
    for name, s in (("observed", obs), ("simulated", sim)):
        acc = s.acceleration if s.acceleration is not None else np.gradient(s.velocity, s.dt)
        if name == "simulated" and obs.acceleration is not None and s.acceleration is not None:
            rows.append(["rmse_acceleration", rmse(obs.acceleration, s.acceleration)])
        jerk = jerk_series(acc, dt=s.dt)
        rows.append([f"jerk_max_abs_{name}", float(np.max(np.abs(jerk)))])
        rows.append([f"jerk_rms_{name}", float(np.sqrt(np.mean(jerk ** 2)))])
        if coeffs is not None:
            rate = fuel_rate(np.maximum(s.velocity, 0.0), acc, coeffs)
            rows.append([f"fuel_total_{name}", float(np.sum(rate[:-1]) * s.dt)])
    return [write_csv(out / "metrics.csv", ["metric", "value"], rows)]


def cmd_fit_sigmoid(cfg, out: Path, seed, fmt, base) -> list:
    if "csv" in cfg:
        path = _resolve(base, cfg["csv"])
        with path.open(encoding="utf-8", newline="") as fh:
            reader = csv.DictReader(ln for ln in fh if not ln.lstrip().startswith("#"))
            xc, yc = cfg.get("x_column", "x"), cfg.get("y_column", "y")
            pairs = [(float(r[xc]), float(r[yc])) for r in reader]
        x, y = np.array([p[0] for p in pairs]), np.array([p[1] for p in pairs])
    else:
        x, y = np.asarray(cfg["x"], float), np.asarray(cfg["y"], float)
    if cfg.get("normalize", False):
        x, y = minmax_normalize(x), minmax_normalize(y)
    fit = fit_sigmoid(x, y)
    header = ["amplitude", "lambda", "x0", "r2", "adj_r2", "rmse"]
    files = [write_csv(out / "sigmoid_fit.csv", header,
                       [[fit.amplitude, fit.lam, fit.x0, fit.r2, fit.adj_r2, fit.rmse]])]
    if fmt == "csv+svg":
        xs = np.linspace(x.min(), x.max(), 200)
        files.append(atomic_write_text(out / "sigmoid_fit.svg", svg.scatter_chart(
            [x], [y], title=f"logistic fit, R2 = {fit.r2:.4f}", xlabel="x", ylabel="y",
            curve=(xs, fit.predict(xs)))))
    return files


COMMANDS = {
    "simulate": cmd_simulate,
    "ring": cmd_ring,
    "stability-map": cmd_stability_map,
    "fundamental-diagram": cmd_fundamental_diagram,
    "calibrate": cmd_calibrate,
    "metrics": cmd_metrics,
    "fit-sigmoid": cmd_fit_sigmoid,
}
RANDOMIZED = {"simulate", "ring", "calibrate"}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="carfollow", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", required=True, help="JSON configuration file")
        p.add_argument("--seed", type=int, default=None, help="RNG seed (overrides the config)")
        p.add_argument("--out", default="out", help="output directory")
        p.add_argument("--format", choices=["csv", "csv+svg"], default="csv")
        p.add_argument("--quiet", action="store_true")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.WARNING if args.quiet else logging.INFO, format="%(message)s")
    config_path = Path(args.config)
    out = Path(args.out)
    try:
        cfg = validate_config(args.command, read_json(config_path))
        seed = args.seed if args.seed is not None else cfg.get("seed")
        if seed is None and args.command in RANDOMIZED:
            seed = int(np.random.SeedSequence().entropy % 2 ** 63)
        if seed is not None and not 0 <= seed < 2 ** 64:
            raise ConfigError("--seed must lie in [0, 2^64)")
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO

    try:
        files = COMMANDS[args.command](cfg, out, seed, args.format, config_path.parent)
        manifest = {"command": args.command, "version": __version__, "seed": seed,
                    "config": str(config_path), "format": args.format,
                    "outputs": sorted(Path(f).name for f in files)}
        write_json(out / "run.json", manifest)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    except (SimulationError, ArithmeticError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (ValueError, TypeError) as exc:
        # bad values that passed the schema (e.g. v_e >= v0, n * length >= L)
        # or numerical failures raised as ValueError by the solvers
        code = EXIT_NUMERIC if "infeasible" in str(exc) or "converge" in str(exc) else EXIT_CONFIG
        label = "numerical failure" if code == EXIT_NUMERIC else "config error"
        print(f"{label}: {exc}", file=sys.stderr)
        return code
    if not args.quiet:
        for f in files:
            log.info("wrote %s", f)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
