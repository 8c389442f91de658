"""Time-stepped platoon and ring-road simulation.

Vehicles are indexed front to back in a platoon (vehicle 0 is the externally
driven leader) and in driving order on a ring (vehicle ``i`` follows
``i + 1``, the last one follows vehicle 0 across the seam). Positions are
stored unwrapped so that gaps on the ring always sum to
``L - n * vehicle_length``.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from types import SimpleNamespace
from typing import NamedTuple, Sequence

import numpy as np

from .equilibrium import equilibrium_velocity
from .model import (ModelParams, RandomGapPolicy, _idm_law, _sigmoid_law, check_model,
                    desired_spacing, on_idm_branch, update_cautious_distance)

DEFAULT_DT = 0.1
DEFAULT_VEHICLE_LENGTH = 5.0
# gap used to keep the law finite after a collision in "continue" mode
COLLISION_GAP_FLOOR = 1e-3
COASTING_THRESHOLD = 0.05
JAM_GAP_MARGIN = 0.5
COASTING_MIN_DURATION = 1.0


class SimulationError(RuntimeError):
    """Non-finite state encountered; ``step`` is the offending step index."""

    def __init__(self, message: str, step: int):
        super().__init__(f"{message} (step {step})")
        self.step = step


class Event(NamedTuple):
    step: int
    time: float
    vehicle: int
    kind: str  # "collision" | "negative_velocity" | "velocity_clamped"


# --------------------------------------------------------------------------
# leader profiles

@dataclass(frozen=True)
class ConstantLeader:
    speed: float

    def __post_init__(self):
        if self.speed < 0:
            raise ValueError("leader speed must be >= 0")

    def speeds(self, t):
        return np.full(np.shape(t), float(self.speed))


@dataclass(frozen=True)
class StationaryLeader(ConstantLeader):
    speed: float = 0.0


@dataclass(frozen=True)
class PiecewiseLeader:
    """Speed ``speeds[i]`` applies from ``times[i]`` until the next breakpoint."""

    times: tuple
    speeds_: tuple

    def __post_init__(self):
        if len(self.times) != len(self.speeds_) or not self.times:
            raise ValueError("times and speeds must be non-empty and of equal length")
        if np.any(np.diff(self.times) <= 0):
            raise ValueError("breakpoint times must be strictly increasing")
        if min(self.speeds_) < 0:
            raise ValueError("leader speeds must be >= 0")

    def speeds(self, t):
        idx = np.searchsorted(np.asarray(self.times), t, side="right") - 1
        return np.asarray(self.speeds_, dtype=float)[np.clip(idx, 0, None)]


@dataclass(frozen=True)
class SinusoidLeader:
    """``mean + amplitude * sin(2 pi (t - start) / period)`` after ``start``."""

    mean: float
    amplitude: float
    period: float
    start: float = 0.0

    def __post_init__(self):
        if self.mean - abs(self.amplitude) < 0:
            raise ValueError("sinusoid would drive the leader backwards")
        if self.period <= 0:
            raise ValueError("period must be > 0")

    def speeds(self, t):
        t = np.asarray(t, dtype=float)
        phase = 2.0 * np.pi * (t - self.start) / self.period
        return np.where(t >= self.start, self.mean + self.amplitude * np.sin(phase), self.mean)


@dataclass(frozen=True, eq=False)
class RecordedLeader:
    """A measured leader trajectory, linearly interpolated onto the step grid."""

    time: np.ndarray
    position: np.ndarray
    velocity: np.ndarray

    def __post_init__(self):
        if np.any(np.asarray(self.velocity) < 0):
            raise ValueError("recorded leader velocity must be >= 0")

    def speeds(self, t):
        return np.interp(t, self.time, self.velocity)


def leader_motion(profile, time: np.ndarray, x0: float = 0.0):
    """Position, velocity and acceleration of the leader on ``time``.

    For speed-defined profiles the acceleration is the per-step velocity
    increment and positions follow the ballistic update, so the leader is
    kinematically consistent. A :class:`RecordedLeader` keeps its recorded
    positions (shifted so that the first sample sits at ``x0``).
    """
    dt = time[1] - time[0] if len(time) > 1 else DEFAULT_DT
    if isinstance(profile, RecordedLeader):
        x = np.interp(time, profile.time, profile.position)
        x = x - x[0] + x0
        v = np.interp(time, profile.time, profile.velocity)
        a = np.gradient(v, dt) if len(v) > 1 else np.zeros_like(v)
        return x, v, a
    v = profile.speeds(time)
    a = np.zeros_like(v)
    a[:-1] = np.diff(v) / dt
    x = np.empty_like(v)
    x[0] = x0
    if len(v) > 1:
        x[1:] = x0 + np.cumsum(v[:-1] * dt + 0.5 * a[:-1] * dt ** 2)
    return x, v, a


# --------------------------------------------------------------------------
# configuration and results

@dataclass
class PlatoonConfig:
    """Open-road platoon.

    ``n_vehicles`` counts the leader. ``params``/``model`` are either shared
    by all followers or given per follower (length ``n_vehicles - 1``);
    likewise ``initial_gaps`` and ``initial_velocities``.
    """

    n_vehicles: int
    params: ModelParams | Sequence[ModelParams]
    leader: object
    duration: float
    model: str | Sequence[str] = "sigmoid_idm"
    vehicle_length: float = DEFAULT_VEHICLE_LENGTH
    initial_gaps: float | Sequence[float] = 10.0
    initial_velocities: float | Sequence[float] = 0.0
    dt: float = DEFAULT_DT
    velocity_clamp: bool = True
    gap_policy: RandomGapPolicy | None = None
    seed: int | None = None
    on_collision: str = "halt"
    integrator: str = "ballistic"

    def __post_init__(self):
        if self.n_vehicles < 2:
            raise ValueError("a platoon needs a leader and at least one follower")
        _validate_common(self)
        gaps = np.broadcast_to(np.asarray(self.initial_gaps, dtype=float), (self.n_vehicles - 1,))
        if np.any(gaps <= 0):
            raise ValueError("initial gaps must be > 0")


@dataclass
class RingConfig:
    """Single-lane ring road of circumference ``length``.

    ``init_mode="homogeneous"`` spaces vehicles evenly, each at ``v_init``
    (default: the equilibrium speed of the resulting gap).
    ``init_mode="jam"`` packs them at ``jam_gap`` (default ``s0 + 0.5``) at
    rest, leaving the remaining road ahead of the jam head. A gap of exactly
    ``s0`` is avoided because the branch test ``s0 < S`` then flips on
    round-off.
    """

    length: float
    n_vehicles: int
    params: ModelParams | Sequence[ModelParams]
    duration: float
    model: str | Sequence[str] = "sigmoid_idm"
    vehicle_length: float = DEFAULT_VEHICLE_LENGTH
    init_mode: str = "homogeneous"
    v_init: float | None = None
    jam_gap: float | None = None
    perturbation: float = 0.0
    dt: float = DEFAULT_DT
    velocity_clamp: bool = True
    gap_policy: RandomGapPolicy | None = None
    seed: int | None = None
    on_collision: str = "halt"
    integrator: str = "ballistic"

    def __post_init__(self):
        if self.n_vehicles < 1:
            raise ValueError("need at least one vehicle")
        if self.n_vehicles * self.vehicle_length >= self.length:
            raise ValueError("vehicles do not fit on the ring (n * length >= L)")
        if self.init_mode not in ("homogeneous", "jam"):
            raise ValueError(f"init_mode must be 'homogeneous' or 'jam', got {self.init_mode!r}")
        _validate_common(self)


def _validate_common(cfg):
    if cfg.dt <= 0:
        raise ValueError("dt must be > 0")
    if cfg.duration <= 0:
        raise ValueError("duration must be > 0")
    if cfg.on_collision not in ("halt", "continue"):
        raise ValueError("on_collision must be 'halt' or 'continue'")
    if cfg.integrator not in ("ballistic", "euler"):
        raise ValueError("integrator must be 'ballistic' or 'euler'")
    models = [cfg.model] if isinstance(cfg.model, str) else list(cfg.model)
    for m in models:
        check_model(m)


@dataclass
class Trajectory:
    """Uniformly sampled states, arrays shaped ``(n_steps + 1, n_vehicles)``.

    ``acceleration[k]`` is the acceleration applied over ``[t_k, t_k + dt)``;
    the last row holds the law evaluated at the final state. ``gap`` is NaN
    for an externally driven platoon leader.
    """

    dt: float
    time: np.ndarray
    position: np.ndarray
    velocity: np.ndarray
    acceleration: np.ndarray
    gap: np.ndarray
    idm_branch: np.ndarray
    d_c: np.ndarray | None = None
    events: list = field(default_factory=list)
    vehicle_length: float = DEFAULT_VEHICLE_LENGTH
    ring_length: float | None = None
    seed: int | None = None

    @property
    def n_vehicles(self) -> int:
        return self.position.shape[1]

    @property
    def duration(self) -> float:
        return float(self.time[-1] - self.time[0])

    def events_of(self, kind: str) -> list:
        return [e for e in self.events if e.kind == kind]


# --------------------------------------------------------------------------
# stepping

def _per_vehicle(value, n, name):
    items = [value] if isinstance(value, (str, ModelParams)) else list(value)
    if len(items) == 1:
        items = items * n
    if len(items) != n:
        raise ValueError(f"{name}: expected 1 or {n} entries, got {len(items)}")
    return items


def _stack(params: list[ModelParams]) -> SimpleNamespace:
    return SimpleNamespace(**{n: np.array([float(getattr(p, n)) for p in params])
                              for n in ModelParams.names()})


def compute_gaps(x, leader_idx, vehicle_length, ring_length=None):
    """Net gaps to each vehicle's leader; ring gaps wrap across the seam."""
    idx = np.arange(len(leader_idx))
    gaps = x[leader_idx] - x - vehicle_length
    if ring_length is not None:
        gaps = gaps + ring_length * (leader_idx <= idx)
    return gaps


def law_acceleration(gap, v, v_lead, params, is_idm):
    """Acceleration of a mixed fleet; ``is_idm`` selects the IDM per vehicle."""
    s_star = desired_spacing(v, v_lead, params)
    idm = _idm_law(gap, v, s_star, params)
    if np.all(is_idm):
        return idm, np.ones_like(is_idm)
    branch = on_idm_branch(gap, s_star, params) | is_idm
    return np.where(branch, idm, _sigmoid_law(gap, v, s_star, params)), branch


def advance(x, v, a, dt, clamp=True, integrator="ballistic"):
    """One integration step.

    Returns:
        (x_next, v_next, a_applied, clamped). With ``clamp`` a vehicle whose
        speed would turn negative stops exactly at zero speed part-way
        through the step; ``a_applied`` is then ``(v_next - v) / dt``.
    """
    v_next = v + a * dt
    if integrator == "ballistic":
        x_next = x + v * dt + 0.5 * a * dt ** 2
    else:
        x_next = x + v * dt
    clamped = np.zeros(np.shape(v), dtype=bool)
    if clamp:
        clamped = v_next < 0
        if np.any(clamped):
            if integrator == "ballistic":
                with np.errstate(divide="ignore", invalid="ignore"):
                    stop = np.where(a < 0, x - v ** 2 / (2.0 * a), x)
                x_next = np.where(clamped, stop, x_next)
            v_next = np.where(clamped, 0.0, v_next)
            a = np.where(clamped, (v_next - v) / dt, a)
    return x_next, v_next, a, clamped


def step(x, v, params, is_idm, dt, *, leader_idx, vehicle_length,
         ring_length=None, clamp=True, integrator="ballistic"):
    """Advance every vehicle by one step; returns ``(x', v', a_applied)``.

    ``params`` holds one entry per vehicle (a stacked :class:`ModelParams`
    or any object with array attributes of the same names).

    Raises:
        CollisionError: if any gap is non-positive.
    """
    from .model import CollisionError

    gaps = compute_gaps(x, leader_idx, vehicle_length, ring_length)
    if np.any(gaps <= 0):
        raise CollisionError(f"collision for vehicles {np.flatnonzero(gaps <= 0).tolist()}")
    a, _ = law_acceleration(gaps, v, v[leader_idx], params, np.asarray(is_idm))
    x1, v1, a1, _ = advance(x, v, a, dt, clamp, integrator)
    return x1, v1, a1


def _run(x0, v0, leader_idx, follower, params_list, models, cfg, driven=None, ring_length=None):
    n = len(x0)
    n_steps = int(round(cfg.duration / cfg.dt))
    dt = cfg.dt
    time = np.arange(n_steps + 1) * dt
    X = np.full((n_steps + 1, n), np.nan)
    V = np.full_like(X, np.nan)
    A = np.full_like(X, np.nan)
    G = np.full_like(X, np.nan)
    B = np.zeros(X.shape, dtype=bool)
    params = _stack(params_list)
    is_idm = np.array([m == "idm" for m in models])
    rng = np.random.default_rng(cfg.seed)
    D = None
    if cfg.gap_policy is not None:
        D = np.full_like(X, np.nan)
        D[0] = params.d_c
    events: list[Event] = []
    colliding = np.zeros(n, dtype=bool)
    negative = np.zeros(n, dtype=bool)
    was_clamped = np.zeros(n, dtype=bool)

    x = np.asarray(x0, dtype=float).copy()
    v = np.asarray(v0, dtype=float).copy()
    if driven is not None:
        x[~follower], v[~follower] = driven[0][0], driven[1][0]
    last = n_steps
    for k in range(n_steps + 1):
        X[k], V[k] = x, v
        gaps = compute_gaps(x, leader_idx, cfg.vehicle_length, ring_length)
        gaps[~follower] = np.nan
        G[k] = gaps
        hit = follower & (gaps <= 0)
        for i in np.flatnonzero(hit & ~colliding):
            events.append(Event(k, time[k], int(i), "collision"))
        colliding = hit
        law_gaps = np.where(follower, np.maximum(gaps, COLLISION_GAP_FLOOR), 1.0)
        if D is not None:
            params.d_c = D[k]
        a, branch = law_acceleration(law_gaps, v, v[leader_idx], params, is_idm)
        a = np.where(follower, a, 0.0)
        B[k] = branch & follower
        if not np.all(np.isfinite(a)):
            raise SimulationError("non-finite acceleration", k)
        if driven is not None:
            a[~follower] = driven[2][k]
        if k == n_steps or (np.any(hit) and cfg.on_collision == "halt"):
            A[k] = a
            last = k
            break
        x_next, v_next, a_applied, clamped = advance(x, v, a, dt, cfg.velocity_clamp, cfg.integrator)
        A[k] = a_applied
        if driven is not None:
            x_next[~follower] = driven[0][k + 1]
            v_next[~follower] = driven[1][k + 1]
            A[k, ~follower] = driven[2][k]
        if not (np.all(np.isfinite(x_next)) and np.all(np.isfinite(v_next))):
            raise SimulationError("non-finite state", k + 1)
        for i in np.flatnonzero(clamped & ~was_clamped & follower):
            events.append(Event(k, time[k], int(i), "velocity_clamped"))
        was_clamped = clamped
        neg = (v_next < 0) & follower
        for i in np.flatnonzero(neg & ~negative):
            events.append(Event(k + 1, time[k + 1], int(i), "negative_velocity"))
        negative = neg
        if D is not None:
            D[k + 1] = np.where(follower, update_cautious_distance(D[k], cfg.gap_policy, rng), D[k])
        x, v = x_next, v_next

    keep = slice(0, last + 1)
    return Trajectory(
        dt=dt, time=time[keep], position=X[keep], velocity=V[keep], acceleration=A[keep],
        gap=G[keep], idm_branch=B[keep], d_c=None if D is None else D[keep], events=events,
        vehicle_length=cfg.vehicle_length, ring_length=ring_length, seed=cfg.seed,
    )


def simulate_platoon(config: PlatoonConfig) -> Trajectory:
    """Run a platoon behind a leader profile. Deterministic given the seed."""
    n = config.n_vehicles
    nf = n - 1
    params = _per_vehicle(config.params, nf, "params")
    models = _per_vehicle(config.model, nf, "model")
    gaps = np.broadcast_to(np.asarray(config.initial_gaps, dtype=float), (nf,))
    v_init = np.broadcast_to(np.asarray(config.initial_velocities, dtype=float), (nf,))

    n_steps = int(round(config.duration / config.dt))
    time = np.arange(n_steps + 1) * config.dt
    x_lead0 = float(np.sum(gaps) + nf * config.vehicle_length)
    driven = leader_motion(config.leader, time, x_lead0)

    x0 = np.empty(n)
    x0[0] = x_lead0
    x0[1:] = x_lead0 - np.cumsum(gaps + config.vehicle_length)
    v0 = np.concatenate([[driven[1][0]], v_init])
    leader_idx = np.concatenate([[0], np.arange(nf)])
    follower = np.arange(n) > 0
    # the leader's slot in the stacked parameters is never used
    return _run(x0, v0, leader_idx, follower, [params[0]] + params, [models[0]] + models,
                config, driven=driven)


def simulate_ring(config: RingConfig) -> Trajectory:
    """Run the periodic ring; vehicle ``i`` follows ``(i + 1) % n``."""
    n, L, ell = config.n_vehicles, config.length, config.vehicle_length
    params = _per_vehicle(config.params, n, "params")
    models = _per_vehicle(config.model, n, "model")
    if config.init_mode == "homogeneous":
        spacing = L / n
        x0 = np.arange(n) * spacing
        gap = spacing - ell
        if config.v_init is None:
            v0 = np.array([equilibrium_velocity(m, gap, p) for m, p in zip(models, params)])
        else:
            v0 = np.full(n, float(config.v_init))
        x0[0] += config.perturbation
    else:
        jam = np.array([p.s0 + JAM_GAP_MARGIN if config.jam_gap is None else config.jam_gap for p in params])
        x0 = np.concatenate([[0.0], np.cumsum(jam[:-1] + ell)])
        if L - (x0[-1] - x0[0]) - ell <= 0:
            raise ValueError("jam does not fit on the ring")
        v0 = np.full(n, 0.0 if config.v_init is None else float(config.v_init))
    leader_idx = (np.arange(n) + 1) % n
    follower = np.ones(n, dtype=bool)
    return _run(x0, v0, leader_idx, follower, params, models, config, ring_length=L)


# --------------------------------------------------------------------------
# measurements

class FlowDensity(NamedTuple):
    density: float  # veh/m
    flow: float  # veh/s
    speed: float  # m/s


def measure_flow_density(traj: Trajectory, ring, window: float) -> FlowDensity:
    """Ring density n / L, space-mean speed over the final ``window`` seconds."""
    L = ring.length if isinstance(ring, RingConfig) else float(ring)
    if window > traj.duration + 1e-9:
        raise ValueError("window longer than the trajectory")
    sel = traj.time >= traj.time[-1] - window - 1e-9
    rho = traj.n_vehicles / L
    v_mean = float(np.mean(traj.velocity[sel]))
    return FlowDensity(rho, rho * v_mean, v_mean)


class SpacingVelocityLoop(NamedTuple):
    gap: np.ndarray
    velocity: np.ndarray
    phase: np.ndarray
    coasting_fraction: float


def phase_labels(acceleration, velocity, dt, threshold=COASTING_THRESHOLD,
                 min_duration=COASTING_MIN_DURATION, standstill_speed=0.1):
    """Tag samples as accelerating/decelerating/coasting/standstill.

    Coasting needs ``|a| <= threshold`` sustained for ``min_duration``;
    shorter quiet spells keep the sign of the acceleration.
    """
    a = np.asarray(acceleration, dtype=float)
    v = np.asarray(velocity, dtype=float)
    quiet = np.abs(a) <= threshold
    labels = np.where(a > 0, "accelerating", "decelerating").astype(object)
    min_len = int(np.ceil(min_duration / dt - 1e-9))
    k = 0
    while k < len(a):
        if quiet[k]:
            j = k
            while j < len(a) and quiet[j]:
                j += 1
            if j - k >= min_len:
                labels[k:j] = "coasting"
            k = j
        else:
            k += 1
    labels[v < standstill_speed] = "standstill"
    return labels


def spacing_velocity_loop(traj: Trajectory, vehicle: int, threshold=COASTING_THRESHOLD,
                          min_duration=COASTING_MIN_DURATION) -> SpacingVelocityLoop:
    """Phase-tagged (gap, v) loop of one follower.

    The coasting fraction is taken over the samples in motion, so standing
    in a queue does not count as coasting.
    """
    phase = phase_labels(traj.acceleration[:, vehicle], traj.velocity[:, vehicle], traj.dt,
                         threshold, min_duration)
    moving = phase != "standstill"
    frac = float(np.mean(phase[moving] == "coasting")) if np.any(moving) else 0.0
    return SpacingVelocityLoop(traj.gap[:, vehicle], traj.velocity[:, vehicle], phase, frac)


def velocity_amplitude(traj: Trajectory, vehicle: int, t_from: float = 0.0) -> float:
    """Half the peak-to-peak speed of one vehicle after ``t_from``."""
    sel = traj.time >= t_from
    v = traj.velocity[sel, vehicle]
    return 0.5 * float(v.max() - v.min())


def branch_switches(traj: Trajectory) -> list[Event]:
    """Steps at which a vehicle moved between the IDM and logistic branches."""
    flips = np.argwhere(traj.idm_branch[1:] != traj.idm_branch[:-1])
    return [Event(int(k) + 1, float(traj.time[k + 1]), int(i), "branch_switch") for k, i in flips]


def wave_speeds(traj: Trajectory, v_threshold: float | None = None, t_from: float = 0.0):
    """Propagation speeds of the upstream and downstream fronts of a ring jam.

    At each sample the ring is scanned in driving order for speed crossings of
    ``v_threshold`` (default: mean speed). A front where speed drops below the
    threshold in the driving direction is a deceleration front; the reverse is
    an acceleration front. The front closest to the one tracked at the
    previous sample is followed and its unwrapped arc position regressed on
    time.

    Returns:
        (w_acc, w_dec) in m/s, NaN where no front could be tracked.
    """
    if traj.ring_length is None:
        raise ValueError("wave speeds are defined for ring trajectories")
    L = traj.ring_length
    sel = np.flatnonzero(traj.time >= t_from)
    thr = float(np.mean(traj.velocity[sel])) if v_threshold is None else v_threshold

    def track(kind):
        times, pos = [], []
        prev = None
        for k in sel:
            s = np.mod(traj.position[k], L)
            order = np.argsort(s)
            vs = traj.velocity[k, order]
            ahead = np.roll(vs, -1)
            if kind == "dec":
                hits = np.flatnonzero((vs >= thr) & (ahead < thr))
            else:
                hits = np.flatnonzero((vs < thr) & (ahead >= thr))
            if hits.size == 0:
                continue
            cand = s[order][hits]
            if prev is None:
                p = cand[0]
            else:
                d = np.mod(cand - prev + L / 2, L) - L / 2
                p = prev + d[np.argmin(np.abs(d))]
            times.append(traj.time[k])
            pos.append(p)
            prev = p
        if len(times) < 3:
            return float("nan")
        return float(np.polyfit(times, pos, 1)[0])

    return track("acc"), track("dec")
