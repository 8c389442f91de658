"""Steady-state spacing/velocity relations and fundamental diagrams."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.optimize import bisect, brentq, least_squares

from .model import CALIBRATION_BOUNDS, ModelParams, acceleration, check_model

BISECTION_XTOL = 1e-9
DEFAULT_VEHICLE_LENGTH = 5.0

# sentinel spacing returned to the least-squares solver where the IDM
# equilibrium diverges (v >= v0)
_DIVERGED = 1e6


@dataclass(frozen=True)
class EquilibriumPoint:
    v_e: float
    s_e: float
    branch: str  # "idm_branch" | "sigmoid_branch" | "quasi"
    residual: float

    @property
    def exact(self) -> bool:
        return self.branch != "quasi"


@dataclass
class FundamentalDiagram:
    """Flow-density-speed samples, sorted by strictly increasing density.

    ``branch`` labels each point as ``free_ray`` (the appended Q = v0 rho
    segment), ``equilibrium`` or ``quasi``.
    """

    density: np.ndarray
    flow: np.ndarray
    speed: np.ndarray
    spacing: np.ndarray
    branch: np.ndarray
    vehicle_length: float
    model: str
    critical_densities: tuple[float, float] | None = None

    def capacity(self) -> tuple[float, float]:
        """Return (density at max flow, max flow)."""
        i = int(np.argmax(self.flow))
        return float(self.density[i]), float(self.flow[i])


def _check_speed(v_e, params):
    v_e = np.asarray(v_e, dtype=float)
    if np.any(v_e < 0):
        raise ValueError("equilibrium speed must be >= 0")
    if np.any(v_e >= params.v0):
        raise ValueError(f"equilibrium speed must be < v0 = {params.v0} (spacing diverges)")
    return v_e


def idm_equilibrium_spacing(v_e, params: ModelParams):
    """(s0 + v T) / sqrt(1 - (v / v0)^delta); raises for v_e >= v0."""
    v_e = _check_speed(v_e, params)
    return (params.s0 + v_e * params.T) / np.sqrt(1.0 - (v_e / params.v0) ** params.delta)


def sigmoid_idm_closed_form(v_e, params: ModelParams):
    """Logistic-branch closed form s0 + v T + d_c + ln[(1 - r)^-1 - 1] / lam.

    ``r = (v_e / v0)^delta``. Only meaningful where the result exceeds
    s0 + v T; at v_e = 0 it is -inf.
    """
    v_e = _check_speed(v_e, params)
    r = (v_e / params.v0) ** params.delta
    with np.errstate(divide="ignore"):
        log_term = np.log(1.0 / (1.0 - r) - 1.0)
    return params.s0 + v_e * params.T + params.d_c + log_term / params.lam


def equilibrium_spacing(model: str, v_e, params: ModelParams):
    """Vectorised equilibrium spacing for either model.

    For the Sigmoid-IDM this is the exact root where one exists and the
    quasi-equilibrium spacing s0 + v T otherwise, which equals the result of
    :func:`sigmoid_idm_equilibrium` up to the bisection tolerance.
    """
    check_model(model)
    if model == "idm":
        return idm_equilibrium_spacing(v_e, params)
    v_e = _check_speed(v_e, params)
    base = params.s0 + v_e * params.T
    r = (v_e / params.v0) ** params.delta
    with np.errstate(divide="ignore", invalid="ignore"):
        extra = params.d_c + np.log(r / (1.0 - r)) / params.lam
    extra = np.where(np.isfinite(extra), extra, 0.0)
    return base + np.maximum(extra, 0.0)


def sigmoid_idm_equilibrium(v_e: float, params: ModelParams, tol: float = BISECTION_XTOL) -> EquilibriumPoint:
    """Zero-acceleration spacing of the Sigmoid-IDM at speed ``v_e``.

    Bisection runs on the full piecewise law over (s0, S_max]. When the law
    has no zero there (low speeds), the spacing with the smallest |a| is
    returned with ``branch="quasi"``.

    Args:
        v_e: equilibrium speed, 0 <= v_e < v0.
        params: model parameters.
        tol: bisection tolerance on the spacing (m).
    """
    v_e = float(_check_speed(v_e, params))

    def accel(s):
        return float(acceleration("sigmoid_idm", s, v_e, v_e, params))

    s_star = params.s0 + v_e * params.T
    lo = np.nextafter(s_star, np.inf)
    hi = 10.0 * (params.s0 + params.v0 * params.T + params.d_c)
    f_lo = accel(lo)
    f_hi = accel(hi)
    for _ in range(60):
        if f_hi > 0:
            break
        hi *= 2.0
        f_hi = accel(hi)
    if f_lo < 0 < f_hi:
        s_e = bisect(accel, lo, hi, xtol=tol, maxiter=500)
        return EquilibriumPoint(v_e, s_e, "sigmoid_branch", abs(accel(s_e)))
    if f_lo == 0.0:
        return EquilibriumPoint(v_e, lo, "sigmoid_branch", 0.0)
    # no sign change: the best attainable point sits at the branch boundary
    candidates = [(abs(accel(s_star)), s_star), (abs(f_lo), lo)]
    residual, s_e = min(candidates)
    return EquilibriumPoint(v_e, float(s_e), "quasi", residual)


def equilibrium_velocity(model: str, gap: float, params: ModelParams) -> float:
    """Invert the equilibrium relation: the speed whose steady gap is ``gap``."""
    check_model(model)
    if gap <= params.s0:
        return 0.0
    v_hi = params.v0 * (1.0 - 1e-12)

    def excess(v):
        return float(equilibrium_spacing(model, v, params)) - gap

    if excess(v_hi) <= 0:
        return v_hi
    return brentq(excess, 0.0, v_hi, xtol=1e-12)


def fundamental_diagram(params: ModelParams, model: str = "sigmoid_idm",
                        vehicle_length: float = DEFAULT_VEHICLE_LENGTH,
                        v_grid=None, n_free: int = 20) -> FundamentalDiagram:
    """Equilibrium fundamental diagram plus the free-flow ray Q = v0 rho.

    Density is the reciprocal gross spacing, rho = 1 / (s_e + vehicle_length).
    The free-flow ray is sampled on [0, rho_min) where rho_min is the lowest
    density reached by the equilibrium branch.
    """
    check_model(model)
    if v_grid is None:
        v_grid = np.linspace(0.0, params.v0, 200, endpoint=False)
    v_grid = _check_speed(np.unique(np.asarray(v_grid, dtype=float)), params)

    if model == "idm":
        spacing = idm_equilibrium_spacing(v_grid, params)
        branch = np.full(v_grid.shape, "equilibrium", dtype=object)
    else:
        points = [sigmoid_idm_equilibrium(v, params) for v in v_grid]
        spacing = np.array([p.s_e for p in points])
        branch = np.array(["quasi" if p.branch == "quasi" else "equilibrium" for p in points], dtype=object)

    density = 1.0 / (spacing + vehicle_length)
    order = np.argsort(density, kind="stable")
    density, speed, spacing, branch = density[order], v_grid[order], spacing[order], branch[order]

    ray_density = np.linspace(0.0, density[0], n_free, endpoint=False)
    with np.errstate(divide="ignore"):
        ray_spacing = np.where(ray_density > 0, 1.0 / ray_density - vehicle_length, np.inf)
    density = np.concatenate([ray_density, density])
    speed = np.concatenate([np.full(n_free, float(params.v0)), speed])
    spacing = np.concatenate([ray_spacing, spacing])
    branch = np.concatenate([np.full(n_free, "free_ray", dtype=object), branch])
    return FundamentalDiagram(density=density, flow=density * speed, speed=speed, spacing=spacing,
                              branch=branch, vehicle_length=vehicle_length, model=model)


@dataclass
class SteadyStateFit:
    params: ModelParams
    sse: float
    success: bool
    message: str


def _default_free(model):
    return ("v0", "T", "s0") if model == "idm" else ("v0", "T", "s0", "lam", "d_c")


def fit_steady_state(v_bar, s_bar, model: str, bounds: dict | None = None, free=None,
                     base: ModelParams | None = None, x0: dict | None = None) -> SteadyStateFit:
    """Least-squares fit of an equilibrium spacing curve to (speed, spacing) data.

    Args:
        v_bar: observed mean speeds (m/s).
        s_bar: observed mean spacings (m).
        model: ``"idm"`` or ``"sigmoid_idm"``.
        bounds: per-parameter (lo, hi) boxes; defaults to the calibration box.
        free: names of the parameters to fit. The rest are taken from ``base``.
        base: values of the fixed parameters. The default has a = b = 1 and
            delta = 4; a and b do not enter the equilibrium relation.
        x0: optional starting values for the free parameters.

    Returns:
        The fitted parameters and the residual sum of squares. A solver
        failure is reported through ``success``/``message`` with the best
        parameters found rather than raised.
    """
    check_model(model)
    v_bar = np.asarray(v_bar, dtype=float)
    s_bar = np.asarray(s_bar, dtype=float)
    free = tuple(free) if free is not None else _default_free(model)
    if len(v_bar) < len(free):
        raise ValueError(f"need at least {len(free)} points to fit {free}, got {len(v_bar)}")
    bounds = {**CALIBRATION_BOUNDS, **(bounds or {})}
    if base is None:
        base = ModelParams(a=1.0, b=1.0, v0=30.0, T=1.5, s0=2.0, delta=4.0, lam=1.0, d_c=10.0)

    lo = np.array([bounds[n][0] for n in free], dtype=float)
    hi = np.array([bounds[n][1] for n in free], dtype=float)
    # open lower bound at zero for lam
    lo = np.where((lo == 0.0) & (np.array(free) == "lam"), 1e-6, lo)
    start = {n: 0.5 * (l + h) for n, l, h in zip(free, lo, hi)}
    if "v0" in free:
        start["v0"] = min(max(1.1 * v_bar.max() + 1.0, lo[free.index("v0")]), hi[free.index("v0")])
    start.update(x0 or {})
    start_vec = np.clip([start[n] for n in free], lo, hi)

    def build(x):
        return base.replace(**dict(zip(free, (float(v) for v in x))))

    def residuals(x):
        p = build(x)
        ok = v_bar < p.v0
        model_s = np.full(v_bar.shape, _DIVERGED)
        if np.any(ok):
            model_s[ok] = equilibrium_spacing(model, v_bar[ok], p)
        return model_s - s_bar

    if np.all(lo == hi):
        best = build(lo)
        r = residuals(lo)
        return SteadyStateFit(best, float(r @ r), True, "all parameters fixed by bounds")
    fixed = lo == hi
    if np.any(fixed):
        raise ValueError("collapsed bounds are only supported when every free parameter is fixed")
    res = least_squares(residuals, start_vec, bounds=(lo, hi), x_scale="jac",
                        xtol=1e-15, ftol=1e-15, gtol=1e-15, max_nfev=20000)
    return SteadyStateFit(build(res.x), float(res.fun @ res.fun), bool(res.success), res.message)
