"""VT-Micro style fuel-consumption model.

The rate is exp(sum_ij k_ij v^i a^j) for i, j in 0..3. Coefficients are not
bundled as defaults; they must be supplied.
"""
from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np


@dataclass(frozen=True, eq=False)
class FuelCoefficients:
    """``k_pos[i, j]`` multiplies v^i a^j; ``k_neg`` (if given) is used when a < 0."""

    k_pos: np.ndarray
    k_neg: np.ndarray | None = None

    def __post_init__(self):
        for name in ("k_pos", "k_neg"):
            k = getattr(self, name)
            if k is None:
                continue
            k = np.asarray(k, dtype=float)
            if k.shape != (4, 4):
                raise ValueError(f"{name} must be 4x4, got shape {k.shape}")
            if not np.all(np.isfinite(k)):
                raise ValueError(f"{name} has non-finite entries")
            object.__setattr__(self, name, k)


def load_fuel_coefficients(path) -> FuelCoefficients:
    """Read ``{"k_pos": 4x4, "k_neg": 4x4 (optional)}`` from a JSON file.

    Other top-level keys are allowed only if they start with ``_`` (comments).
    """
    data = json.loads(Path(path).read_text(encoding="utf-8"))
    if "k_pos" not in data:
        raise ValueError(f"{path}: missing required key 'k_pos'")
    unknown = {k for k in data if k not in ("k_pos", "k_neg") and not k.startswith("_")}
    if unknown:
        raise ValueError(f"{path}: unknown key(s) {sorted(unknown)}")
    return FuelCoefficients(np.array(data["k_pos"], dtype=float),
                            None if data.get("k_neg") is None else np.array(data["k_neg"], dtype=float))


def fuel_rate(v, a, coeffs: FuelCoefficients):
    """Instantaneous rate for speed ``v`` and acceleration ``a`` (arrays)."""
    if coeffs is None:
        raise ValueError("fuel coefficients are required")
    v = np.asarray(v, dtype=float)
    a = np.asarray(a, dtype=float)
    powers_v = np.stack([v ** i for i in range(4)], axis=-1)
    powers_a = np.stack([a ** j for j in range(4)], axis=-1)
    expo = np.einsum("...i,ij,...j->...", powers_v, coeffs.k_pos, powers_a)
    if coeffs.k_neg is not None:
        expo_neg = np.einsum("...i,ij,...j->...", powers_v, coeffs.k_neg, powers_a)
        expo = np.where(a < 0, expo_neg, expo)
    return np.exp(expo)


def vt_micro_fuel(traj, vehicle: int, coeffs: FuelCoefficients):
    """Per-sample rate and its left Riemann sum over the trajectory.

    Returns:
        (rate, total) where ``total = sum(rate[:-1]) * dt``.
    """
    v = traj.velocity[:, vehicle]
    if np.any(v < 0):
        raise ValueError("fuel model expects non-negative velocities")
    rate = fuel_rate(v, traj.acceleration[:, vehicle], coeffs)
    return rate, float(np.sum(rate[:-1]) * traj.dt)
