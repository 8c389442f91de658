"""Acceleration laws for the IDM and the Sigmoid-IDM.

Everything here is a pure function of its arguments. The array-level entry
point :func:`acceleration` accepts scalars or numpy arrays for the kinematic
state *and* for the parameter fields, so a whole platoon or a whole GA
population can be evaluated in one call.

Conventions
-----------
* ``gap`` is the net bumper-to-bumper spacing S (m).
* ``dv`` is the approach rate ``v - v_lead`` (positive when closing in).
* The desired spacing S* is never clamped at ``s0``.
"""
from __future__ import annotations

from dataclasses import dataclass, fields, replace

import numpy as np
from scipy.special import expit

MODELS = ("idm", "sigmoid_idm")

# calibration box per parameter (lo, hi)
CALIBRATION_BOUNDS = {
    "a": (0.1, 6.0),
    "b": (0.1, 6.0),
    "v0": (10.0, 40.0),
    "T": (0.1, 4.0),
    "s0": (0.1, 6.0),
    "lam": (0.0, 2.0),
    "d_c": (0.1, 20.0),
}

_R_RANGES = {
    "negative": (-1.0, 0.0),
    "zero": (0.0, 0.0),
    "positive": (0.0, 1.0),
    "symmetric": (-1.0, 1.0),
}


class CollisionError(ValueError):
    """Raised when an acceleration law is evaluated at a non-positive gap."""


def check_model(model: str) -> str:
    if model not in MODELS:
        raise ValueError(f"unknown model {model!r}; expected one of {MODELS}")
    return model


@dataclass(frozen=True)
class ModelParams:
    """Parameter vector shared by both car-following laws.

    Fields may be floats or equally-shaped numpy arrays (see :meth:`stack`).
    ``lam`` (cautious driving factor, 1/m) and ``d_c`` (cautious following
    distance, m) are ignored by the IDM.
    """

    a: float
    b: float
    v0: float
    T: float
    s0: float
    delta: float = 4.0
    lam: float = 0.0
    d_c: float = 0.0

    def __post_init__(self):
        for name in ("a", "b", "v0", "T", "s0"):
            if not np.all(np.asarray(getattr(self, name)) > 0):
                raise ValueError(f"{name} must be > 0, got {getattr(self, name)!r}")
        if not np.all(np.asarray(self.delta) >= 1):
            raise ValueError(f"delta must be >= 1, got {self.delta!r}")
        for name in ("lam", "d_c"):
            if not np.all(np.asarray(getattr(self, name)) >= 0):
                raise ValueError(f"{name} must be >= 0, got {getattr(self, name)!r}")

    @classmethod
    def names(cls) -> tuple[str, ...]:
        return tuple(f.name for f in fields(cls))

    @classmethod
    def stack(cls, params: list["ModelParams"]) -> "ModelParams":
        """Combine several parameter sets into one with array-valued fields."""
        return cls(**{n: np.array([float(getattr(p, n)) for p in params]) for n in cls.names()})

    def select(self, index) -> "ModelParams":
        """Pick element(s) out of a stacked parameter set."""
        return ModelParams(**{n: np.asarray(getattr(self, n))[index] for n in self.names()})

    def replace(self, **changes) -> "ModelParams":
        return replace(self, **changes)

    def to_dict(self) -> dict:
        out = {n: float(getattr(self, n)) for n in self.names()}
        out["lambda"] = out.pop("lam")
        return out

    @classmethod
    def from_dict(cls, data: dict) -> "ModelParams":
        data = dict(data)
        if "lambda" in data:
            data["lam"] = data.pop("lambda")
        unknown = set(data) - set(cls.names())
        if unknown:
            raise ValueError(f"unknown parameter(s): {sorted(unknown)}")
        return cls(**{k: float(v) for k, v in data.items()})


@dataclass(frozen=True)
class KinematicContext:
    """Instantaneous stimulus seen by one follower."""

    gap: float
    v: float
    v_lead: float
    dv: float
    s_star: float

    @classmethod
    def from_state(cls, gap, v, v_lead, params: ModelParams) -> "KinematicContext":
        return cls(gap=gap, v=v, v_lead=v_lead, dv=v - v_lead,
                   s_star=desired_spacing(v, v_lead, params))


@dataclass(frozen=True)
class RandomGapPolicy:
    """Stochastic update rule for the cautious following distance.

    Attributes:
        p: probability that d_c changes in a given step.
        d: variation range (m); the change is ``r * d``.
        r_mode: support of the uniform draw r, one of ``negative`` ([-1, 0]),
            ``zero``, ``positive`` ([0, 1]) or ``symmetric`` ([-1, 1]).
        floor: lower bound applied to the updated value (m).
    """

    p: float
    d: float
    r_mode: str = "symmetric"
    floor: float = 0.0

    def __post_init__(self):
        if not 0.0 <= self.p <= 1.0:
            raise ValueError(f"p must lie in [0, 1], got {self.p}")
        if self.d < 0:
            raise ValueError(f"d must be >= 0, got {self.d}")
        if self.r_mode not in _R_RANGES:
            raise ValueError(f"r_mode must be one of {sorted(_R_RANGES)}, got {self.r_mode!r}")


def desired_spacing(v, v_lead, params: ModelParams):
    """S* = s0 + v T + v (v - v_lead) / (2 sqrt(a b)), without clamping."""
    return params.s0 + v * params.T + v * (v - v_lead) / (2.0 * np.sqrt(params.a * params.b))


def free_acceleration(v, params: ModelParams):
    """Free-road term a [1 - (v / v0)^delta]."""
    return params.a * (1.0 - (v / params.v0) ** params.delta)


def _idm_law(gap, v, s_star, params):
    return params.a * (1.0 - (v / params.v0) ** params.delta - (s_star / gap) ** 2)


def _sigmoid_law(gap, v, s_star, params):
    # 1 / (1 + exp(x)) == expit(-x); expit does not overflow.
    ramp = expit(-params.lam * (gap - s_star - params.d_c))
    return params.a * (1.0 - (v / params.v0) ** params.delta - ramp)


def on_idm_branch(gap, s_star, params: ModelParams):
    """True where the Sigmoid-IDM uses its IDM branch (s0 < S <= S*)."""
    return (gap > params.s0) & (gap <= s_star)


def _check_gap(gap):
    if np.any(np.asarray(gap) <= 0):
        raise CollisionError("gap must be > 0 (collision state)")


def idm_acceleration(ctx: KinematicContext, params: ModelParams) -> float:
    """IDM acceleration a [1 - (v/v0)^delta - (S*/S)^2].

    Raises:
        CollisionError: if ``ctx.gap <= 0``.
    """
    _check_gap(ctx.gap)
    return _idm_law(ctx.gap, ctx.v, ctx.s_star, params)


def sigmoid_idm_acceleration(ctx: KinematicContext, params: ModelParams) -> float:
    """Sigmoid-IDM acceleration.

    Uses the IDM expression when ``s0 < S <= S*`` and the logistic spacing
    response ``a [1 - (v/v0)^delta - 1 / (1 + exp(lam (S - S* - d_c)))]``
    everywhere else, including ``S <= s0``.
    """
    _check_gap(ctx.gap)
    if on_idm_branch(ctx.gap, ctx.s_star, params):
        return _idm_law(ctx.gap, ctx.v, ctx.s_star, params)
    return _sigmoid_law(ctx.gap, ctx.v, ctx.s_star, params)


def acceleration(model: str, gap, v, v_lead, params: ModelParams):
    """Vectorised acceleration of either law.

    Args:
        model: ``"idm"`` or ``"sigmoid_idm"``.
        gap: net spacing (m), scalar or array.
        v: follower speed (m/s).
        v_lead: leader speed (m/s).
        params: scalar or stacked parameters broadcastable against the state.

    Returns:
        Acceleration in m/s^2 with the broadcast shape of the inputs.
    """
    check_model(model)
    _check_gap(gap)
    s_star = desired_spacing(v, v_lead, params)
    idm = _idm_law(gap, v, s_star, params)
    if model == "idm":
        return idm
    sig = _sigmoid_law(gap, v, s_star, params)
    return np.where(on_idm_branch(gap, s_star, params), idm, sig)


def update_cautious_distance(d_c, policy: RandomGapPolicy, rng):
    """One stochastic step of the cautious-distance process.

    With probability ``policy.p`` the value becomes ``max(d_c + r d, floor)``
    with r uniform on the interval selected by ``policy.r_mode``; otherwise it
    is left unchanged. Works elementwise on arrays, one draw pair per element.

    Args:
        d_c: current cautious distance(s) in m.
        policy: the update rule.
        rng: a ``numpy.random.Generator`` (anything with ``random`` and
            ``uniform`` methods of the same signature works).
    """
    d_c = np.asarray(d_c, dtype=float)
    if policy.p == 0.0 or policy.r_mode == "zero":
        return d_c.copy() if d_c.ndim else float(d_c)
    lo, hi = _R_RANGES[policy.r_mode]
    change = rng.random(d_c.shape) < policy.p
    r = rng.uniform(lo, hi, d_c.shape)
    out = np.where(change, np.maximum(d_c + r * policy.d, policy.floor), d_c)
    return out if out.ndim else float(out)
