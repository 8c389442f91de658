"""Goodness-of-fit and driving-quality metrics."""
from __future__ import annotations

import numpy as np


def _pair(observed, simulated):
    obs = np.asarray(observed, dtype=float)
    sim = np.asarray(simulated, dtype=float)
    if obs.shape != sim.shape:
        raise ValueError(f"length mismatch: {obs.shape} vs {sim.shape}")
    if obs.size == 0:
        raise ValueError("series must be non-empty")
    return obs, sim


def rmse(observed, simulated) -> float:
    """Root-mean-square difference of two equally long series."""
    obs, sim = _pair(observed, simulated)
    return float(np.sqrt(np.mean((obs - sim) ** 2)))


def theils_u(observed, simulated) -> float:
    """Theil's inequality coefficient RMSE / (RMS(obs) + RMS(sim)), in [0, 1].

    The sums run over the last axis, so a 2-D ``simulated`` array scores a
    whole population of candidate series against one observation.

    Raises:
        ValueError: when both series are identically zero.
    """
    obs = np.asarray(observed, dtype=float)
    sim = np.asarray(simulated, dtype=float)
    if obs.shape[-1] != sim.shape[-1] or obs.size == 0:
        raise ValueError(f"length mismatch: {obs.shape} vs {sim.shape}")
    # U is scale-free; normalising first keeps tiny or huge values from under/overflowing
    scale = np.maximum(np.max(np.abs(obs), axis=-1), np.max(np.abs(sim), axis=-1))
    if np.any(scale == 0):
        raise ValueError("Theil's U is undefined for two all-zero series")
    scale = np.expand_dims(scale, -1)
    obs, sim = obs / scale, sim / scale
    num = np.sqrt(np.mean((obs - sim) ** 2, axis=-1))
    den = np.sqrt(np.mean(obs ** 2, axis=-1)) + np.sqrt(np.mean(sim ** 2, axis=-1))
    out = num / den
    return float(out) if np.ndim(out) == 0 else out


theils_u_spacing = theils_u


def pearson(x, y) -> float:
    """Product-moment correlation coefficient."""
    x, y = _pair(x, y)
    if x.size < 2:
        raise ValueError("need at least two samples")
    dx = x - x.mean()
    dy = y - y.mean()
    sxx, syy = dx @ dx, dy @ dy
    if sxx == 0 or syy == 0:
        raise ValueError("correlation undefined for a zero-variance series")
    return float(np.clip(dx @ dy / np.sqrt(sxx * syy), -1.0, 1.0))


def jerk_series(traj, vehicle: int | None = None, dt: float | None = None) -> np.ndarray:
    """Time derivative of acceleration (m/s^3).

    Central differences inside, one-sided at both ends.

    Args:
        traj: a :class:`~carfollow.simulation.Trajectory` (then ``vehicle``
            selects the column) or a plain acceleration series (then ``dt``
            is required).
    """
    if hasattr(traj, "acceleration"):
        acc = traj.acceleration[:, vehicle]
        dt = traj.dt
    else:
        acc = np.asarray(traj, dtype=float)
        if dt is None:
            raise ValueError("dt is required for a raw acceleration series")
    if acc.size < 2:
        raise ValueError("need at least two samples")
    return np.gradient(acc, dt)
