"""Power and log-power Lyapunov functions and their one-step drifts.

``f_gamma(x) = x**-gamma`` for ``x >= 1`` (1 below) and
``g_nu(x) = log(x)**-nu`` for ``x >= e`` (1 below).  For finite-support
kernels the drift ``E[f(X_{n+1}) - f(X_n) | X_n = x]`` is evaluated exactly;
the second-order expansions in terms of the increment moments give the
predicted leading behaviour.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass

import numpy as np

from .trajectory import format_float

#: default parameter sweep {2^j : -6 <= j <= 6}
DEFAULT_PARAM_GRID = tuple(2.0 ** j for j in range(-6, 7))


def _check_param(v, name):
    v = float(v)
    if not (v > 0 and math.isfinite(v)):
        raise ValueError(f"{name} must be a finite real > 0")
    return v


def f_gamma(x, gamma):
    """``x**-gamma`` for ``x >= 1`` and 1 otherwise (vectorised)."""
    gamma = _check_param(gamma, "gamma")
    x = np.asarray(x, dtype=np.float64)
    with np.errstate(divide="ignore"):
        out = np.where(x >= 1.0, np.maximum(x, 1.0) ** -gamma, 1.0)
    return out[()] if out.ndim == 0 else out


def g_nu(x, nu):
    """``log(x)**-nu`` for ``x >= e`` and 1 otherwise (vectorised)."""
    nu = _check_param(nu, "nu")
    x = np.asarray(x, dtype=np.float64)
    out = np.where(x >= math.e, np.log(np.maximum(x, math.e)) ** -nu, 1.0)
    return out[()] if out.ndim == 0 else out


@dataclass(frozen=True)
class LyapunovFunction:
    """``f_gamma`` (``kind="f"``) or ``g_nu`` (``kind="g"``) with its parameter.

    Attributes
    ----------
    kind : {"f", "g"}
    param : float
        gamma or nu, ``> 0``.
    y2 : float or None
        Fitted threshold beyond which the drift sign was verified.
    """

    kind: str
    param: float
    y2: float | None = None

    def __post_init__(self):
        if self.kind not in ("f", "g"):
            raise ValueError("kind must be 'f' or 'g'")
        object.__setattr__(self, "param",
                           _check_param(self.param, "gamma" if self.kind == "f" else "nu"))

    @property
    def cut(self):
        """Level below which the function is constant 1."""
        return 1.0 if self.kind == "f" else math.e

    def __call__(self, x):
        return f_gamma(x, self.param) if self.kind == "f" else g_nu(x, self.param)

    def difference(self, y, x, relative=False):
        """``F(y) - F(x)`` with cancellation-free evaluation when both are above the cut.

        With ``relative=True`` returns ``(F(y) - F(x)) / F(x)``, which keeps its
        sign where ``F(x)`` itself underflows.
        """
        y = np.asarray(y, dtype=np.float64)
        x = float(x)
        if x < self.cut:
            return self(y) - 1.0
        out = np.empty(y.shape)
        above = y >= self.cut
        rel = np.log1p((y[above] - x) / x)  # log(y/x)
        if self.kind == "f":
            logfx = -self.param * math.log(x)
            out[above] = np.expm1(-self.param * rel)
        else:
            L = math.log(x)
            logfx = -self.param * math.log(L)
            out[above] = np.expm1(-self.param * np.log1p(rel / L))
        if relative:
            with np.errstate(over="ignore"):
                out[~above] = math.expm1(-logfx) if -logfx < 700 else math.inf
            return out
        out[above] *= math.exp(logfx)
        out[~above] = -math.expm1(logfx)
        return out


def gamma_function(gamma):
    return LyapunovFunction("f", gamma)


def nu_function(nu):
    return LyapunovFunction("g", nu)


def _as_function(func):
    if isinstance(func, LyapunovFunction):
        return func
    if isinstance(func, tuple) and len(func) == 2:
        return LyapunovFunction(*func)
    raise TypeError("func must be a LyapunovFunction or a (kind, param) tuple")


def exact_one_step_drift(spec, func, x, relative=False):
    """``sum_y P(x -> y) F(y) - F(x)`` for a finite-support kernel.

    Parameters
    ----------
    spec : ProcessSpec
        Must implement :meth:`~cutwalk.process.ProcessSpec.transition`.
    func : LyapunovFunction or (kind, param)
    x : float or array_like
        Position(s) in the spec's state set.
    relative : bool, default False
        Divide by ``F(x)`` (sign-preserving where ``F(x)`` underflows).

    Returns
    -------
    float or ndarray

    Raises
    ------
    TypeError
        If the spec has continuous (or no scalar) one-step support.
    """
    func = _as_function(func)
    xs = np.atleast_1d(np.asarray(x, dtype=np.float64))
    out = np.empty(xs.shape)
    for i, xv in enumerate(xs):
        ys, ps = spec.transition(xv)
        out[i] = float(np.dot(ps, func.difference(ys, xv, relative)))
    return out[0] if np.ndim(x) == 0 else out


@dataclass(frozen=True)
class DriftPrediction:
    """Second-order prediction of the drift at ``x``.

    ``lower``/``upper`` bound the predicted drift over the profile's moment
    envelopes; ``bracket_lower``/``bracket_upper`` bound the bracketed moment
    combination; ``error_scale`` is the order of the neglected remainder.
    """

    x: float
    lower: float
    upper: float
    bracket_lower: float
    bracket_upper: float
    error_scale: float

    @property
    def leading(self):
        return 0.5 * (self.lower + self.upper)


def predicted_drift(profile, x, func):
    """Expansion of the drift of ``f_gamma`` or ``g_nu`` from the moment envelopes.

    For ``f_gamma``::

        -(gamma/2) [2x mu1 - (1 + gamma) mu2] x^(-gamma-2),  remainder o(x^(-gamma-2))

    For ``g_nu``::

        -(nu/2) [2x mu1 - mu2] x^-2 log^(-nu-1) x + (nu(nu+1)/2) mu2 x^-2 log^(-nu-2) x,
        remainder o(x^-2 log^(-nu-2) x)

    The second-order Taylor coefficient of the ``log^(-nu-2)`` term is
    ``nu(nu+1)/2``.

    Parameters
    ----------
    profile : MomentProfile
    x : float
        ``x >= 1`` for f and ``x >= e`` for g.
    func : LyapunovFunction or (kind, param)

    Returns
    -------
    DriftPrediction
    """
    func = _as_function(func)
    x = float(x)
    if x < func.cut:
        raise ValueError(f"expansion needs x >= {func.cut}")
    l1, u1, l2, u2 = (float(v) for v in profile.evaluate(x))
    if not all(map(math.isfinite, (l1, u1, l2, u2))):
        raise ValueError("profile bounds are not finite at x")
    p = func.param
    if func.kind == "f":
        b_lo = 2 * x * l1 - (1 + p) * u2
        b_hi = 2 * x * u1 - (1 + p) * l2
        scale = x ** (-p - 2)
        lo = -0.5 * p * b_hi * scale
        hi = -0.5 * p * b_lo * scale
        return DriftPrediction(x, lo, hi, b_lo, b_hi, scale)
    L = math.log(x)
    b_lo = 2 * x * l1 - u2
    b_hi = 2 * x * u1 - l2
    s1 = x ** -2 * L ** (-p - 1)
    s2 = x ** -2 * L ** (-p - 2)
    c2 = 0.5 * p * (p + 1)
    # the bracket and the second term share mu2; bound each part separately
    lo = -0.5 * p * b_hi * s1 + c2 * l2 * s2
    hi = -0.5 * p * b_lo * s1 + c2 * u2 * s2
    return DriftPrediction(x, lo, hi, b_lo, b_hi, s2)


def relative_leading_error(spec, func, x):
    """``|exact - leading| / |leading|`` with the midpoint prediction as leading term."""
    pred = predicted_drift(spec.profile, x, func)
    exact = float(exact_one_step_drift(spec, func, x))
    return abs(exact - pred.leading) / abs(pred.leading)


def envelope_constant(spec, func, x_grid):
    """Smallest ``C`` with ``exact in [lower - C s, upper + C s]`` on the grid.

    ``s`` is the remainder scale of :func:`predicted_drift`.  This is the
    fitted constant that makes the little-o remainder concrete.
    """
    worst = 0.0
    for x in np.asarray(x_grid, dtype=np.float64):
        pred = predicted_drift(spec.profile, x, func)
        e = float(exact_one_step_drift(spec, func, x))
        gap = max(pred.lower - e, e - pred.upper, 0.0)
        worst = max(worst, gap / pred.error_scale)
    return worst


def fit_threshold(spec, func, x_grid, sign):
    """Smallest grid point ``y2`` such that the drift has the given sign on ``[y2, inf) cap grid``.

    Parameters
    ----------
    sign : {-1, +1}
        -1 asks for a supermartingale (drift <= 0), +1 for a submartingale.

    Returns
    -------
    float or None
        None if the sign fails at the largest grid point.
    """
    if sign not in (-1, 1):
        raise ValueError("sign must be -1 or +1")
    xs = np.sort(np.asarray(x_grid, dtype=np.float64))
    d = exact_one_step_drift(spec, func, xs, relative=True) * sign
    ok = d >= 0
    if not ok[-1]:
        return None
    bad = np.flatnonzero(~ok)
    return float(xs[bad[-1] + 1]) if bad.size else float(xs[0])


@dataclass(frozen=True)
class DriftRow:
    x: float
    param: float
    exact: float
    pred_lo: float
    pred_hi: float


def drift_sweep(spec, kind, x_grid, params=DEFAULT_PARAM_GRID):
    """Exact and predicted drift for every ``(x, param)`` pair.

    Returns
    -------
    list of DriftRow
    """
    rows = []
    for p in params:
        func = LyapunovFunction(kind, p)
        ex = exact_one_step_drift(spec, func, np.asarray(x_grid, dtype=np.float64))
        for x, e in zip(np.asarray(x_grid, dtype=np.float64), np.atleast_1d(ex)):
            pred = predicted_drift(spec.profile, x, func)
            rows.append(DriftRow(float(x), float(p), float(e), pred.lower, pred.upper))
    return rows


def martingale_window(spec, kind, x_grid, params=DEFAULT_PARAM_GRID):
    """Per parameter, the fitted super- and sub-martingale thresholds.

    Returns
    -------
    dict
        ``param -> (y2_super, y2_sub)`` with None where the sign fails.
    """
    out = {}
    for p in params:
        func = LyapunovFunction(kind, p)
        out[float(p)] = (fit_threshold(spec, func, x_grid, -1),
                         fit_threshold(spec, func, x_grid, +1))
    return out


DRIFT_HEADER = ("x", "param", "exact", "pred_lo", "pred_hi")


def write_drift_csv(rows, fh):
    """Write sweep rows to an open text file with header ``x,param,exact,pred_lo,pred_hi``."""
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(DRIFT_HEADER)
    for r in rows:
        w.writerow([format_float(r.x), format_float(r.param), repr(r.exact),
                    repr(r.pred_lo), repr(r.pred_hi)])
