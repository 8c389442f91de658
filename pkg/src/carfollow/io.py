"""File formats: trajectory CSV, JSON configs and reports, atomic writes."""
from __future__ import annotations

import csv
import io
import json
import os
import tempfile
from dataclasses import dataclass
from pathlib import Path

import numpy as np

TRAJECTORY_COLUMNS = ("time", "vehicle_id", "position", "velocity", "acceleration", "gap", "d_c")
REQUIRED_INPUT_COLUMNS = ("time", "vehicle_id", "position")
SMOOTHING_WINDOW = 0.5  # s, moving average applied to differenced positions


class ConfigError(ValueError):
    """Invalid configuration; the message names the offending field or line."""


def fmt(x) -> str:
    """Deterministic text form of a number; NaN becomes an empty field."""
    if x is None:
        return ""
    x = float(x)
    if np.isnan(x):
        return ""
    return repr(round(x, 12) + 0.0)


def atomic_write_text(path, text: str) -> Path:
    """Write via a temporary file in the same directory, then rename."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(prefix=f".{path.name}.", dir=path.parent)
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
    return path


def write_json(path, data) -> Path:
    return atomic_write_text(path, json.dumps(data, indent=2, sort_keys=True) + "\n")


def read_json(path) -> dict:
    """Parse JSON, turning syntax errors into :class:`ConfigError` with line/column."""
    text = Path(path).read_text(encoding="utf-8")
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: line {exc.lineno}, column {exc.colno}: {exc.msg}") from None


def rows_to_csv(header, rows, comments=()) -> str:
    buf = io.StringIO()
    for c in comments:
        buf.write(f"# {c}\n")
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([fmt(v) if isinstance(v, (float, np.floating)) else v for v in row])
    return buf.getvalue()


def write_csv(path, header, rows, comments=()) -> Path:
    return atomic_write_text(path, rows_to_csv(header, rows, comments))


def trajectory_to_csv(traj, comments=()) -> str:
    """Long-format CSV, one row per (time, vehicle).

    Ring positions are written modulo the circumference. The ``d_c`` column
    appears only when the run carried a stochastic cautious distance.
    """
    cols = list(TRAJECTORY_COLUMNS if traj.d_c is not None else TRAJECTORY_COLUMNS[:-1])
    pos = traj.position if traj.ring_length is None else np.mod(traj.position, traj.ring_length)
    rows = []
    for k, t in enumerate(traj.time):
        for i in range(traj.n_vehicles):
            row = [fmt(t), str(i), fmt(pos[k, i]), fmt(traj.velocity[k, i]),
                   fmt(traj.acceleration[k, i]), fmt(traj.gap[k, i])]
            if traj.d_c is not None:
                row.append(fmt(traj.d_c[k, i]))
            rows.append(row)
    return rows_to_csv(cols, rows, comments)


def write_trajectory_csv(path, traj, comments=()) -> Path:
    return atomic_write_text(path, trajectory_to_csv(traj, comments))


@dataclass
class VehicleSeries:
    """One vehicle's samples read back from a trajectory CSV."""

    vehicle_id: str
    time: np.ndarray
    position: np.ndarray
    velocity: np.ndarray
    acceleration: np.ndarray | None = None
    gap: np.ndarray | None = None

    @property
    def dt(self) -> float:
        return float(self.time[1] - self.time[0])


def derive_velocity(time, position, window: float = SMOOTHING_WINDOW) -> np.ndarray:
    """Speed from positions: central differences then a centred moving average."""
    time = np.asarray(time, dtype=float)
    position = np.asarray(position, dtype=float)
    if time.size < 2:
        raise ValueError("need at least two samples to differentiate")
    raw = np.gradient(position, time)
    dt = float(np.median(np.diff(time)))
    n = max(1, int(round(window / dt)))
    if n == 1:
        return raw
    kernel = np.ones(n) / n
    # edge-padded so the ends are not pulled towards zero
    pad_l, pad_r = n // 2, n - 1 - n // 2
    padded = np.concatenate([np.full(pad_l, raw[0]), raw, np.full(pad_r, raw[-1])])
    return np.convolve(padded, kernel, mode="valid")


def read_trajectory_csv(path) -> dict[str, VehicleSeries]:
    """Read ``time,vehicle_id,position[,velocity,...]``; ``#`` lines are comments.

    Missing or empty velocity values are derived from positions. Rows may come
    in any order; each vehicle's samples are sorted by time.
    """
    path = Path(path)
    with path.open(encoding="utf-8", newline="") as fh:
        lines = [ln for ln in fh if ln.strip() and not ln.lstrip().startswith("#")]
    reader = csv.DictReader(lines)
    if reader.fieldnames is None:
        raise ConfigError(f"{path}: empty trajectory file")
    missing = [c for c in REQUIRED_INPUT_COLUMNS if c not in reader.fieldnames]
    if missing:
        raise ConfigError(f"{path}: missing column(s) {missing}")
    data: dict[str, dict[str, list]] = {}
    for lineno, row in enumerate(reader, start=2):
        vid = row["vehicle_id"].strip()
        rec = data.setdefault(vid, {c: [] for c in ("time", "position", "velocity", "acceleration", "gap")})
        try:
            for c in rec:
                val = row.get(c)
                rec[c].append(float(val) if val not in (None, "") else np.nan)
        except ValueError as exc:
            raise ConfigError(f"{path}: data row {lineno}: {exc}") from None
    out = {}
    for vid, rec in data.items():
        arr = {c: np.asarray(v, dtype=float) for c, v in rec.items()}
        order = np.argsort(arr["time"], kind="stable")
        arr = {c: v[order] for c, v in arr.items()}
        vel = arr["velocity"]
        if np.any(np.isnan(vel)):
            vel = derive_velocity(arr["time"], arr["position"])
        out[vid] = VehicleSeries(
            vid, arr["time"], arr["position"], vel,
            None if np.all(np.isnan(arr["acceleration"])) else arr["acceleration"],
            None if np.all(np.isnan(arr["gap"])) else arr["gap"],
        )
    return out
