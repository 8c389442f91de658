"""Linear stability of the car-following laws around a uniform flow state.

Partial derivatives are taken with respect to the gap s, the own speed v and
the relative speed dv = v_leader - v_follower (note: the *opposite* sign of
the approach rate used inside :mod:`carfollow.model`). With this orientation
a sensible model has f_s > 0, f_v < 0 and f_dv > 0.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
from scipy.special import expit

from .equilibrium import sigmoid_idm_equilibrium, idm_equilibrium_spacing
from .model import ModelParams, check_model

DEFAULT_OMEGAS = np.logspace(-3, 1, 200)


class DegenerateEquilibriumError(ValueError):
    """f_v vanishes, so the string criterion is undefined."""


class Derivatives(NamedTuple):
    f_s: float
    f_v: float
    f_dv: float


def equilibrium_branch(params: ModelParams, model: str, v_i, s_i):
    """Branch used at a uniform state (dv = 0).

    Returns:
        (branch, boundary): ``branch`` is ``"idm"`` or ``"sigmoid"``
        (elementwise for arrays); ``boundary`` flags s_i == S*, where the
        derivatives are taken on the sigmoid side.
    """
    check_model(model)
    s_star = params.s0 + v_i * params.T
    boundary = np.asarray(s_i == s_star)
    if model == "idm":
        return np.full(boundary.shape, "idm")[()], np.zeros_like(boundary)[()]
    idm = (s_i > params.s0) & (s_i < s_star)
    return np.where(idm, "idm", "sigmoid")[()], boundary[()]


def partial_derivatives(params: ModelParams, model: str, v_i, s_i) -> Derivatives:
    """Analytic (f_s, f_v, f_dv) at the uniform state (s_i, v_i, dv = 0).

    Vectorised over ``v_i`` and ``s_i``.
    """
    check_model(model)
    v_i = np.asarray(v_i, dtype=float)
    s_i = np.asarray(s_i, dtype=float)
    if np.any(s_i <= 0):
        raise ValueError("s_i must be > 0")
    a, b, T = params.a, params.b, params.T
    s_star = params.s0 + v_i * T
    free_slope = -a * params.delta * v_i ** (params.delta - 1) / params.v0 ** params.delta
    sqrt_ab = np.sqrt(a * b)

    # IDM: a [1 - (v/v0)^d - (S*/s)^2], dS*/dv = T, dS*/d(dv) = -v / (2 sqrt(ab))
    idm = Derivatives(
        f_s=2.0 * a * s_star ** 2 / s_i ** 3,
        f_v=free_slope - 2.0 * a * s_star * T / s_i ** 2,
        f_dv=a * s_star * v_i / (sqrt_ab * s_i ** 2),
    )
    if model == "idm":
        return Derivatives(*(np.asarray(x)[()] for x in idm))

    # logistic: a [1 - (v/v0)^d - sigma(z)], z = lam (s - S* - d_c), sigma' = -sigma (1 - sigma)
    z = params.lam * (s_i - s_star - params.d_c)
    bell = expit(z) * expit(-z)
    sig = Derivatives(
        f_s=a * params.lam * bell,
        f_v=free_slope - a * params.lam * T * bell,
        f_dv=a * params.lam * v_i * bell / (2.0 * sqrt_ab),
    )
    use_idm = (s_i > params.s0) & (s_i < s_star)
    return Derivatives(*(np.where(use_idm, x_idm, x_sig)[()] for x_idm, x_sig in zip(idm, sig)))


def local_stability(f_s, f_v, f_dv):
    """Roots of gamma^2 - (f_v - f_dv) gamma + f_s = 0.

    Returns:
        (gamma_plus, gamma_minus, stable) where ``stable`` means both real
        parts are negative.
    """
    trace = np.asarray(f_v - f_dv, dtype=complex)
    root = np.sqrt(trace ** 2 - 4.0 * np.asarray(f_s, dtype=complex))
    g_plus = (trace + root) / 2.0
    g_minus = (trace - root) / 2.0
    stable = (g_plus.real < 0) & (g_minus.real < 0)
    return g_plus[()], g_minus[()], stable[()]


def string_criterion(f_s, f_v, f_dv):
    """1/2 - f_dv / f_v - f_s / f_v^2 and whether it is positive."""
    f_v = np.asarray(f_v, dtype=float)
    if np.any(f_v == 0):
        raise DegenerateEquilibriumError("f_v = 0: string criterion undefined")
    value = 0.5 - f_dv / f_v - f_s / f_v ** 2
    return value[()] if np.ndim(value) == 0 else value, (value > 0)[()]


def transfer_magnitude(f_s, f_v, f_dv, omega):
    """|G(i omega)| of the linearised follower response to its leader."""
    omega = np.asarray(omega, dtype=float)
    if np.any(omega <= 0):
        raise ValueError("omega must be > 0")
    num = f_s ** 2 + omega ** 2 * f_dv ** 2
    den = (f_s - omega ** 2) ** 2 + omega ** 2 * (f_v - f_dv) ** 2
    return np.sqrt(num / den)


def max_transfer_magnitude(f_s, f_v, f_dv, omegas=DEFAULT_OMEGAS) -> float:
    return float(np.max(transfer_magnitude(f_s, f_v, f_dv, omegas)))


@dataclass(frozen=True)
class StabilityReport:
    v_e: float
    s_e: float
    branch: str
    boundary: bool
    quasi: bool
    f_s: float
    f_v: float
    f_dv: float
    gamma_plus: complex
    gamma_minus: complex
    string_criterion: float
    locally_stable: bool
    string_stable: bool

    @property
    def classification(self) -> str:
        if not self.locally_stable:
            return "locally_unstable"
        return "stable" if self.string_stable else "string_unstable"


def analyze(params: ModelParams, model: str, v_e: float, s_e: float | None = None) -> StabilityReport:
    """Full linear stability report at speed ``v_e``.

    The spacing defaults to the model's equilibrium spacing; a Sigmoid-IDM
    quasi-equilibrium is reported with ``quasi=True``.
    """
    check_model(model)
    quasi = False
    if s_e is None:
        if model == "idm":
            s_e = float(idm_equilibrium_spacing(v_e, params))
        else:
            point = sigmoid_idm_equilibrium(v_e, params)
            s_e, quasi = point.s_e, not point.exact
    f_s, f_v, f_dv = partial_derivatives(params, model, v_e, s_e)
    branch, boundary = equilibrium_branch(params, model, v_e, s_e)
    g_plus, g_minus, local = local_stability(f_s, f_v, f_dv)
    crit, string = string_criterion(f_s, f_v, f_dv)
    return StabilityReport(
        v_e=float(v_e), s_e=float(s_e), branch=str(branch), boundary=bool(boundary), quasi=quasi,
        f_s=float(f_s), f_v=float(f_v), f_dv=float(f_dv),
        gamma_plus=complex(g_plus), gamma_minus=complex(g_minus),
        string_criterion=float(crit), locally_stable=bool(local), string_stable=bool(string),
    )


@dataclass
class StabilityMap:
    """String/local stability over a (lam, d_c) grid.

    Arrays are indexed ``[i_lam, i_dc]``.
    """

    lam_grid: np.ndarray
    dc_grid: np.ndarray
    context: ModelParams
    v_e: float
    s_e: np.ndarray
    criterion: np.ndarray
    classification: np.ndarray
    quasi: np.ndarray
    boundary: np.ndarray

    def cell(self, lam: float, d_c: float) -> dict:
        i = int(np.argmin(np.abs(self.lam_grid - lam)))
        j = int(np.argmin(np.abs(self.dc_grid - d_c)))
        return {
            "lambda": float(self.lam_grid[i]), "d_c": float(self.dc_grid[j]),
            "s_e": float(self.s_e[i, j]), "criterion": float(self.criterion[i, j]),
            "classification": str(self.classification[i, j]),
            "quasi": bool(self.quasi[i, j]), "boundary": bool(self.boundary[i, j]),
        }


def stability_map(context: ModelParams, v_e: float, lam_grid, dc_grid) -> StabilityMap:
    """Classify every (lam, d_c) cell of the Sigmoid-IDM at speed ``v_e``.

    Cells whose equilibrium is only a quasi-equilibrium keep their computed
    classification but are flagged in ``quasi``.
    """
    lam_grid = np.atleast_1d(np.asarray(lam_grid, dtype=float))
    dc_grid = np.atleast_1d(np.asarray(dc_grid, dtype=float))
    if lam_grid.size == 0 or dc_grid.size == 0:
        raise ValueError("grids must be non-empty")
    shape = (lam_grid.size, dc_grid.size)
    s_e = np.empty(shape)
    crit = np.empty(shape)
    quasi = np.zeros(shape, dtype=bool)
    boundary = np.zeros(shape, dtype=bool)
    cls = np.empty(shape, dtype=object)
    for i, lam in enumerate(lam_grid):
        for j, d_c in enumerate(dc_grid):
            rep = analyze(context.replace(lam=float(lam), d_c=float(d_c)), "sigmoid_idm", v_e)
            s_e[i, j] = rep.s_e
            crit[i, j] = rep.string_criterion
            quasi[i, j] = rep.quasi
            boundary[i, j] = rep.boundary
            cls[i, j] = rep.classification
    return StabilityMap(lam_grid, dc_grid, context, float(v_e), s_e, crit, cls, quasi, boundary)
