"""Stopping times, Monte Carlo escape/return estimators and exact birth-death oracles.

Notation: ``tau_{n,x}`` is the first time ``m >= n`` with ``X_m <= x`` and
``eta_{n,x}`` the first time ``m >= n`` with ``X_m > x``.

Races
-----
:func:`mc_race` runs independent restarts from ``start`` until the scalar
position is ``<= x`` (return) or ``>= x + y`` (escape).  The escape target is
closed so that a start at ``x + y`` counts as an immediate escape and, for a
nearest-neighbour chain, the event is exactly "hit ``x + y`` before ``x``".
Replicas that exhaust ``max_steps`` are reported as truncations and counted as
non-escapes in the point estimate.

Binomial intervals
------------------
``p_hat = escapes / R`` and ``SE = sqrt(p_hat (1 - p_hat) / R)``.  The 95%
half-width is ``1.96 SE`` (normal approximation) when both ``escapes`` and
``R - escapes`` are at least 10; otherwise the Wilson score interval is
reported and the half-width is half its length.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numpy as np
from numba import njit
from scipy.special import logsumexp

from . import _kernels as K
from ._rng import check_seed, seed_stream, stream_keys, uniform
from .ladder import BDScale, _nn_chain
from .trajectory import VectorTrajectory, as_trajectory, format_float

Z95 = 1.959963984540054
SMALL_COUNT = 10
DEFAULT_MAX_STEPS = 10_000_000


@dataclass(frozen=True)
class EscapeEstimate:
    """Binomial estimate of a race probability.

    Attributes
    ----------
    estimate : float
        ``escapes / R``.
    half_width : float
        95% half-width (normal, or Wilson for small counts).
    escapes, returns, truncations : int
        Outcome counts; they sum to ``R``.
    method : str
        ``"normal"`` or ``"wilson"``.
    bias_bound : float or None
        Upper bound on the surrogate bias (never-return estimates only).
    reference : float or None
        Exact value of the surrogate event, where an oracle exists.
    """

    estimate: float
    half_width: float
    escapes: int
    returns: int
    truncations: int
    method: str = "normal"
    bias_bound: float | None = None
    reference: float | None = None
    extra: dict = field(default_factory=dict, compare=False)

    @property
    def replicas(self):
        return self.escapes + self.returns + self.truncations

    @property
    def se(self):
        p = self.estimate
        return math.sqrt(p * (1 - p) / self.replicas)

    @property
    def interval(self):
        return (max(0.0, self.estimate - self.half_width),
                min(1.0, self.estimate + self.half_width))

    @classmethod
    def from_counts(cls, escapes, returns, truncations, **kw):
        n = escapes + returns + truncations
        if n < 1:
            raise ValueError("need at least one replica")
        p = escapes / n
        if min(escapes, n - escapes) >= SMALL_COUNT:
            hw = Z95 * math.sqrt(p * (1 - p) / n)
            method = "normal"
        else:
            z2 = Z95 * Z95
            centre = (p + z2 / (2 * n)) / (1 + z2 / n)
            rad = Z95 * math.sqrt(p * (1 - p) / n + z2 / (4 * n * n)) / (1 + z2 / n)
            lo, hi = centre - rad, centre + rad
            hw = 0.5 * (hi - lo)
            method = "wilson"
        return cls(p, hw, int(escapes), int(returns), int(truncations), method, **kw)


# ---------------------------------------------------------------------------
# stopping times on a realised path
# ---------------------------------------------------------------------------

def first_passage(traj, n, x):
    """``(tau_{n,x}, eta_{n,x})`` on a scalar path; None when not attained by the horizon.

    Examples
    --------
    >>> first_passage([0, 1, 2, 3, 4, 5, 6, 7], 0, 5)
    (0, 6)
    """
    traj = as_trajectory(traj)
    if isinstance(traj, VectorTrajectory):
        traj = traj.norms()
    n = int(n)
    if not 0 <= n <= traj.horizon:
        raise ValueError("n must lie in [0, horizon]")
    seg = traj.positions[n:]
    below = seg <= x
    above = ~below
    tau = n + int(np.argmax(below)) if below.any() else None
    eta = n + int(np.argmax(above)) if above.any() else None
    return tau, eta


# ---------------------------------------------------------------------------
# Monte Carlo races
# ---------------------------------------------------------------------------

def _check_race(spec, start, x, y):
    x = float(x)
    y = float(y)
    if not y > 0:
        raise ValueError("y must be > 0")
    state, pos = spec.initial_state(start)
    if not x < pos <= x + y:
        raise ValueError(f"start must satisfy x < start <= x + y (got {pos})")
    return state, pos, x, y


def _run_race(spec, state, pos, lo, hi, R, seed, max_steps, first_replica=0):
    R = int(R)
    if R < 1:
        raise ValueError("R must be >= 1")
    keys = stream_keys(check_seed(seed))
    return K.race_batch(spec.kind, spec.prm, state, pos, float(lo), float(hi), keys,
                        int(first_replica), R, int(max_steps))


def mc_race(spec, start, x, y, R, seed, max_steps=DEFAULT_MAX_STEPS):
    """Estimate ``P(eta_{x+y} < tau_x)`` from ``start`` by ``R`` independent restarts.

    Parameters
    ----------
    spec : ProcessSpec
        Vector specs are raced on their norm.
    start : float or array_like
        With ``x < |start| <= x + y``.
    x, y : float
    R : int
    seed : int
    max_steps : int
        Per-replica step cap; exhausted replicas are truncations.

    Returns
    -------
    EscapeEstimate
    """
    state, pos, x, y = _check_race(spec, start, x, y)
    out, _, _ = _run_race(spec, state, pos, x, x + y, R, seed, max_steps)
    return EscapeEstimate.from_counts(int((out == K.ESCAPED).sum()),
                                      int((out == K.RETURNED).sum()),
                                      int((out == K.TRUNCATED).sum()))


def targeted_entry_probability(spec, start, x, y, R, seed, max_steps=DEFAULT_MAX_STEPS):
    """Estimate ``P(eta_{x+y} < tau_x and X_eta = x + y)`` on a lattice spec.

    Uses the same replica streams as :func:`mc_race`, so for equal seeds the
    estimate never exceeds the race estimate and equals it for
    nearest-neighbour chains.
    """
    if not spec.lattice or spec.vector:
        raise TypeError("targeted entry needs a scalar lattice spec")
    state, pos, x, y = _check_race(spec, start, x, y)
    if x != round(x) or y != round(y):
        raise ValueError("x and x + y must be lattice points")
    out, landing, _ = _run_race(spec, state, pos, x, x + y, R, seed, max_steps)
    hit = (out == K.ESCAPED) & (landing == x + y)
    return EscapeEstimate.from_counts(int(hit.sum()),
                                      int((out != K.TRUNCATED).sum() - hit.sum()),
                                      int((out == K.TRUNCATED).sum()))


# ---------------------------------------------------------------------------
# exact birth-death oracles
# ---------------------------------------------------------------------------

def bd_exact_race(spec, start, a, b):
    """Gambler's-ruin probability ``P_start(hit b before a)`` for a nearest-neighbour chain.

    ``[sum_{k=a}^{start-1} e_k] / [sum_{k=a}^{b-1} e_k]`` with
    ``e_k = prod_{i=a+1}^{k} q_i/p_i``, accumulated in log space.

    Examples
    --------
    >>> from cutwalk.generators import birth_death_lamperti
    >>> round(bd_exact_race(birth_death_lamperti(0.0), 5, 0, 10), 12)  # doctest: +SKIP
    0.5
    """
    spec = _nn_chain(spec)
    a, start, b = int(a), int(start), int(b)
    if not a < start < b:
        if start == b and a < b:
            return 1.0
        raise ValueError("need a < start < b")
    if a < 0:
        raise ValueError("levels must be in Z_+")
    p = spec.up_probability(np.arange(a + 1, b, dtype=np.float64))
    if np.any(p <= 0) or np.any(p >= 1):
        raise ValueError("p must lie strictly inside (0, 1) on the open interval (a, b)")
    logrho = np.log1p(-p) - np.log(p)
    loge = np.concatenate([[0.0], np.cumsum(logrho)])  # k = a .. b-1
    num = logsumexp(loge[: start - a])
    den = logsumexp(loge)
    return float(math.exp(num - den))


def bd_escape_probability(spec, start, x):
    """Exact ``P_start(tau_x = infinity)`` from the never-return series.

    ``1 - t(start)/t(x)`` with ``t(k) = sum_{j >= k} e_j``; the series is
    summed exactly up to ``4 max(start, x)`` and its tail integrated from the
    asymptotic form of ``e_j``.  Zero for recurrent chains.
    """
    spec = _nn_chain(spec)
    x, start = int(x), int(start)
    if not start > x:
        raise ValueError("need start > x")
    sc = BDScale(spec, x, start + 1)
    return sc.never_hit(start, x)


def bd_return_probability(spec, start, x):
    """``P_start(tau_x < infinity)``."""
    return 1.0 - bd_escape_probability(spec, start, x)


# ---------------------------------------------------------------------------
# never-return estimators
# ---------------------------------------------------------------------------

@njit(cache=True)
def _climb_batch(e, base, x, start, top, tail_escape, keys, first_rep, n_rep):
    """Level-by-level exact simulation of the running maximum until return to ``x``.

    From running maximum ``m`` the chain reaches ``m + 1`` before ``x`` with
    probability ``S(m)/S(m+1)``, ``S(m) = sum_{k=x}^{m-1} e_k``; beyond ``top``
    the remaining escape probability ``tail_escape`` is applied at once.
    Returns per-replica outcome and highest level reached.
    """
    outcome = np.empty(n_rep, np.int8)
    reached = np.empty(n_rep, np.int64)
    rng = np.empty(4, np.uint64)
    cs = np.cumsum(e[x - base:top + 1 - base])  # cs[j] = S(x + j + 1)
    for r in range(n_rep):
        seed_stream(rng, keys, first_rep + r)
        m = start
        res = 1
        while m <= top:
            if uniform(rng) >= cs[m - 1 - x] / cs[m - x]:
                res = 0
                break
            m += 1
        if res == 1 and uniform(rng) >= tail_escape:
            res = 0
        outcome[r] = res
        reached[r] = m
    return outcome, reached


def mc_escape_forever(spec, start, x, R, seed, y_cap_mult=50.0, method="race",
                      max_steps=DEFAULT_MAX_STEPS, first_replica=0):
    """Estimate ``P(tau_x = infinity)`` from ``start``.

    Parameters
    ----------
    spec : ProcessSpec
    start : float
        ``x < start``.
    x : float
    R : int
    seed : int
    y_cap_mult : float, default 50
        ``method="race"`` estimates the surrogate ``P(eta_{x+y*} < tau_x)``
        with ``y* = y_cap_mult * x``.  The surrogate overestimates by
        ``P(race) * P_{x+y*}(tau_x < infinity)``, reported as ``bias_bound``
        (exact for birth-death specs; None otherwise).
    method : {"race", "skeleton"}
        ``"skeleton"`` (nearest-neighbour birth-death specs only) simulates
        the running-maximum skeleton exactly in law -- each new maximum is won
        or lost against a return to ``x`` with its gambler's-ruin probability
        -- and needs no cap; it costs O(levels climbed) per replica instead of
        O(steps).

    Returns
    -------
    EscapeEstimate
        ``reference`` holds the exact surrogate (race) or never-return
        (skeleton) probability for birth-death specs.
    """
    x = float(x)
    if method == "race":
        ystar = float(y_cap_mult) * x
        if not ystar > 0:
            raise ValueError("y_cap_mult * x must be > 0")
        state, pos, _, _ = _check_race(spec, start, x, ystar)
        out, _, _ = _run_race(spec, state, pos, x, x + ystar, R, seed, max_steps,
                              first_replica)
        esc = int((out == K.ESCAPED).sum())
        ret = int((out == K.RETURNED).sum())
        tr = int((out == K.TRUNCATED).sum())
        bias = ref = None
        extra = {"y_cap": ystar}
        if _is_bd(spec) and x == int(x) and pos == int(pos):
            hi = int(math.ceil(x + ystar))
            back = bd_return_probability(spec, hi, int(x))
            bias = (esc / (esc + ret + tr)) * back
            ref = bd_exact_race(spec, int(pos), int(x), hi)
            extra["never_return"] = bd_escape_probability(spec, int(pos), int(x))
        return EscapeEstimate.from_counts(esc, ret, tr, bias_bound=bias, reference=ref,
                                          extra=extra)
    if method != "skeleton":
        raise ValueError("method must be 'race' or 'skeleton'")
    spec = _nn_chain(spec)
    xi = int(x)
    s = int(start)
    if xi != x or s != start or not s > xi:
        raise ValueError("skeleton method needs integer levels x < start")
    top = max(64 * s, s + 1024)
    sc = BDScale(spec, xi, top + 1)
    tail = sc.never_hit(top + 1, xi)
    out, reached = _climb_batch(sc.e, sc.base, xi, s, top, tail,
                                stream_keys(check_seed(seed)), int(first_replica), int(R))
    esc = int(out.sum())
    return EscapeEstimate.from_counts(esc, int(R) - esc, 0, bias_bound=0.0,
                                      reference=sc.never_hit(s, xi),
                                      extra={"max_level_mean": float(reached.mean())})


def _is_bd(spec):
    try:
        _nn_chain(spec)
    except TypeError:
        return False
    return True


# ---------------------------------------------------------------------------
# output
# ---------------------------------------------------------------------------

HIT_HEADER = ("x", "y", "estimate", "ci", "escapes", "returns", "truncations")


def write_hit_csv(rows, fh):
    """Write ``(x, y, EscapeEstimate)`` rows with header ``x,y,estimate,ci,escapes,returns,truncations``."""
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(HIT_HEADER)
    for x, y, est in rows:
        w.writerow([format_float(x), format_float(y), repr(est.estimate),
                    repr(est.half_width), est.escapes, est.returns, est.truncations])
