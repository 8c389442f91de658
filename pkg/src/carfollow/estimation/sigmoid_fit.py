"""Logistic curve fitting, y = amp / (1 + exp(-lam (x - x0)))."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.optimize import least_squares, minimize
from scipy.special import expit


@dataclass(frozen=True)
class SigmoidFit:
    amplitude: float
    lam: float
    x0: float
    r2: float
    adj_r2: float
    rmse: float
    sse: float
    starts: tuple = ()  # SSE at each starting point

    def predict(self, x):
        return logistic(x, self.amplitude, self.lam, self.x0)


def logistic(x, amplitude, lam, x0):
    return amplitude * expit(lam * (np.asarray(x, dtype=float) - x0))


def minmax_normalize(values) -> np.ndarray:
    """Scale a series to [0, 1]."""
    values = np.asarray(values, dtype=float)
    span = values.max() - values.min()
    if span == 0:
        raise ValueError("cannot normalise a constant series")
    return (values - values.min()) / span


def _crossing(x, y, level):
    """First x where y crosses ``level`` (linear interpolation), scanning in x order."""
    above = np.flatnonzero(y >= level)
    if above.size == 0:
        return x[-1]
    k = above[0]
    if k == 0:
        return x[0]
    x1, x2, y1, y2 = x[k - 1], x[k], y[k - 1], y[k]
    return x1 + (level - y1) * (x2 - x1) / (y2 - y1) if y2 != y1 else x2


def initial_guesses(x, y):
    """Heuristic starts: amplitude = max y, x0 at half-max, lam from the 25-75 % rise."""
    order = np.argsort(x)
    x, y = x[order], y[order]
    amp = float(np.max(y))
    x0 = float(_crossing(x, y, 0.5 * amp))
    width = float(_crossing(x, y, 0.75 * amp) - _crossing(x, y, 0.25 * amp))
    span = float(x[-1] - x[0]) or 1.0
    # a logistic rises from 25 % to 75 % over 2 ln 3 / lam
    lam = 2.0 * np.log(3.0) / width if width > 0 else 10.0 / span
    if y[0] > y[-1]:
        lam = -abs(lam)
    starts = [(amp, lam, x0)]
    for scale in (0.5, 2.0):
        starts.append((amp, lam * scale, x0))
    starts.append((amp, lam, float(np.median(x))))
    return starts


def fit_sigmoid(x, y, starts=None) -> SigmoidFit:
    """Least-squares logistic fit.

    Nelder-Mead is run from every starting point; the best result is then
    polished with Levenberg-Marquardt so that noiseless data are matched to
    machine precision.

    Args:
        x: abscissa (e.g. normalised spacing).
        y: ordinate (e.g. normalised acceleration).
        starts: optional list of (amplitude, lam, x0) starting points; the
            heuristic guesses are used otherwise.

    Raises:
        ValueError: fewer than 4 points or constant ``y``.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.shape != y.shape or x.size < 4:
        raise ValueError("need at least 4 (x, y) pairs of equal length")
    if np.ptp(y) == 0:
        raise ValueError("constant y: the logistic is not identifiable")
    starts = list(starts) if starts is not None else initial_guesses(x, y)

    def resid(p):
        return logistic(x, *p) - y

    def sse(p):
        r = resid(p)
        return float(r @ r)

    start_sse = tuple(sse(p) for p in starts)
    best = min(
        (minimize(sse, p, method="Nelder-Mead",
                  options={"xatol": 1e-12, "fatol": 1e-16, "maxiter": 20000, "maxfev": 40000})
         for p in starts),
        key=lambda r: r.fun,
    )
    polished = least_squares(resid, best.x, method="lm", xtol=1e-15, ftol=1e-15, gtol=1e-15)
    params = polished.x if sse(polished.x) <= best.fun else best.x

    r = resid(params)
    sse_val = float(r @ r)
    sst = float(np.sum((y - y.mean()) ** 2))
    n, k = y.size, 3
    r2 = 1.0 - sse_val / sst
    adj = 1.0 - (1.0 - r2) * (n - 1) / (n - k - 1) if n > k + 1 else float("nan")
    return SigmoidFit(float(params[0]), float(params[1]), float(params[2]), r2, adj,
                      float(np.sqrt(sse_val / n)), sse_val, start_sse)
