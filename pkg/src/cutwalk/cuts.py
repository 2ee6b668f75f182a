"""Detectors for cutpoints, separating points, cut times, cut intervals and annuli.

All detectors work on a realized finite path ``X_0..X_N`` and therefore
report *finite-horizon* versions of definitions that quantify over the
whole future.  A structure is ``CANDIDATE`` when its defining clauses hold
up to the horizon, and ``CONFIRMED`` when additionally the path climbs at
least ``W`` above it (``max_n X_n >= level + W``); the default window is
``W = 50 B``.

Every detector runs in O(N) (O(N log N) for the interval detectors, which
sort visited values) on top of prefix-maximum and suffix-minimum arrays.
"""
from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass, field

import numpy as np

from . import _cutcore as core
from .trajectory import ScalarTrajectory, VectorTrajectory, as_trajectory, format_float

CONFIRMED = "CONFIRMED"
CANDIDATE = "CANDIDATE"

DEFAULT_WINDOW_MULT = 50.0


def default_window(jump_bound):
    """The default confirmation window ``50 B``."""
    return DEFAULT_WINDOW_MULT * float(jump_bound)


def _scalar(traj):
    traj = as_trajectory(traj)
    if isinstance(traj, VectorTrajectory):
        raise TypeError("expected a scalar trajectory; use detect_cut_annuli or .norms()")
    return traj


def _window(traj, W):
    if W is None:
        B = traj.jump_bound
        if B is None:
            inc = np.abs(np.diff(traj.positions))
            B = float(inc.max()) if inc.size and inc.max() > 0 else 1.0
        return default_window(B)
    W = float(W)
    if not W >= 0:
        raise ValueError("confirmation window W must be >= 0")
    return W


@dataclass(frozen=True)
class _Arrays:
    x: np.ndarray
    pm_prev: np.ndarray
    sm_next: np.ndarray
    cut: np.ndarray
    strong: np.ndarray
    ctime: np.ndarray


def _arrays(traj):
    x = traj.positions
    n1 = x.size
    pm = np.empty(n1)
    sm = np.empty(n1)
    core.prefix_suffix(x, pm, sm)
    cut = np.empty(n1, dtype=np.bool_)
    strong = np.empty(n1, dtype=np.bool_)
    ctime = np.empty(n1, dtype=np.bool_)
    core.cut_flags(x, pm, sm, cut, strong, ctime)
    return _Arrays(x, pm, sm, cut, strong, ctime)


# ---------------------------------------------------------------------------
# separating set
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SeparatingSet:
    """The set of separating points as a union of disjoint open intervals.

    ``lo``/``hi`` are the unclipped merged intervals (``lo[0]`` may be
    ``-inf``: then the point 0 also separates; ``hi[-1]`` may be ``+inf``).
    ``source[i]`` is the first time ``n0`` whose window contributed to
    interval ``i``.
    """

    lo: np.ndarray
    hi: np.ndarray
    source: np.ndarray
    top: float
    W: float

    def intervals(self, upper=None):
        """Intervals clipped to ``[0, upper]`` (default: the path maximum)."""
        upper = self.top if upper is None else upper
        lo = np.maximum(self.lo, 0.0)
        hi = np.minimum(self.hi, upper)
        keep = hi > lo
        return list(zip(lo[keep].tolist(), hi[keep].tolist()))

    def measure(self, a=0.0, b=None):
        """Lebesgue measure of ``S`` intersected with ``[a, b]`` (``b`` default: path max)."""
        b = self.top if b is None else b
        lo = np.maximum(self.lo, max(a, 0.0))
        hi = np.minimum(self.hi, b)
        return float(np.sum(np.clip(hi - lo, 0.0, None)))

    @property
    def candidate_measure(self):
        """``|S cap [0, max X]|``."""
        return self.measure(0.0, self.top)

    @property
    def confirmed_measure(self):
        """``|S cap [0, max X - W]|``."""
        return self.measure(0.0, self.top - self.W)

    def confirmed_intervals(self):
        return self.intervals(self.top - self.W)

    def contains(self, y):
        """Exact membership of a point ``y >= 0`` (unclipped, finite-horizon)."""
        y = float(y)
        i = np.searchsorted(self.lo, y, side="left") - 1
        if i < 0:
            return False
        return bool(self.lo[i] < y < self.hi[i])

    @property
    def supremum(self):
        """sup of the candidate set within ``[0, max X]`` (-inf if empty)."""
        keep = (self.hi >= 0) & (self.lo < self.top)
        if not keep.any():
            return -np.inf
        return float(min(self.hi[keep][-1], self.top))


def _separating(arr, W):
    n1 = arr.x.size
    lo = np.empty(n1)
    hi = np.empty(n1)
    src = np.empty(n1, dtype=np.int64)
    k = core.separating_intervals(arr.pm_prev, arr.sm_next, lo, hi, src)
    return SeparatingSet(lo[:k].copy(), hi[:k].copy(), src[:k].copy(), float(arr.x.max()), W)


def detect_separating_set(traj, W=None):
    """Separating points: ``x`` with ``X_n < x`` before some ``n0`` and ``X_n > x`` after.

    ``S`` is the union over ``n0`` of ``(max_{n<n0} X_n, min_{n>n0} X_n)``
    (empty max = -inf, empty min = +inf), merged.  The candidate set is
    clipped to ``[0, max X]`` and the confirmed set to ``[0, max X - W]``.

    Returns
    -------
    SeparatingSet
    """
    traj = _scalar(traj)
    return _separating(_arrays(traj), _window(traj, W))


# ---------------------------------------------------------------------------
# report
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class CutReport:
    """Cut structures of one trajectory.

    Attributes
    ----------
    cut_values, cut_times_n0 : ndarray
        Cutpoints ``x`` and the times ``n0`` at which they are attained, in
        time order (hence increasing in ``x``).
    cut_strong : ndarray of bool
        Whether each cutpoint is strong.
    cut_confirmed : ndarray of bool
    cut_times : ndarray of int
        Times ``n < N`` with ``max_{l <= n} X_l < min_{m > n} X_m``.
    cut_times_confirmed : ndarray of bool
    separating : SeparatingSet
    horizon : int
    W : float
    """

    cut_values: np.ndarray
    cut_n0: np.ndarray
    cut_strong: np.ndarray
    cut_confirmed: np.ndarray
    cut_times: np.ndarray
    cut_times_confirmed: np.ndarray
    separating: SeparatingSet
    horizon: int
    W: float
    top: float = field(default=0.0)

    @property
    def n_cutpoints(self):
        return int(self.cut_values.size)

    @property
    def n_strong(self):
        return int(self.cut_strong.sum())

    @property
    def n_cut_times(self):
        return int(self.cut_times.size)

    @property
    def strong_values(self):
        return self.cut_values[self.cut_strong]

    def statuses(self):
        return np.where(self.cut_confirmed, CONFIRMED, CANDIDATE)

    def count_strong(self, x, confirmed=True):
        """``#(C_s cap [0, x])`` (confirmed only, or all candidates)."""
        m = self.cut_strong & (self.cut_values <= x)
        if confirmed:
            m &= self.cut_confirmed
        return int(m.sum())

    def to_json(self):
        """JSON with arrays of ``{x, n0, status}`` records."""
        st = self.statuses()

        def rec(mask):
            return [{"x": float(v), "n0": int(n), "status": str(s)}
                    for v, n, s in zip(self.cut_values[mask], self.cut_n0[mask], st[mask])]

        tstat = np.where(self.cut_times_confirmed, CONFIRMED, CANDIDATE)
        doc = {
            "horizon": self.horizon,
            "W": self.W,
            "cutpoints": rec(np.ones(self.cut_values.size, dtype=bool)),
            "strong_cutpoints": rec(self.cut_strong),
            "cut_times": [{"n": int(n), "status": str(s)}
                          for n, s in zip(self.cut_times, tstat)],
            "separating_set": {
                "candidate": [list(iv) for iv in self.separating.intervals()],
                "confirmed": [list(iv) for iv in self.separating.confirmed_intervals()],
                "candidate_measure": self.separating.candidate_measure,
                "confirmed_measure": self.separating.confirmed_measure,
            },
        }
        return json.dumps(doc, indent=1, sort_keys=False)

    def to_csv(self):
        """Summary CSV with header ``x,n0,strong,status``."""
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["x", "n0", "strong", "status"])
        for v, n, s, c in zip(self.cut_values, self.cut_n0, self.cut_strong, self.statuses()):
            w.writerow([format_float(v), int(n), int(bool(s)), c])
        return buf.getvalue()


def _report(traj, W):
    arr = _arrays(traj)
    top = float(arr.x.max())
    times = np.flatnonzero(arr.cut)
    vals = arr.x[times]
    ct = np.flatnonzero(arr.ctime)
    # a cut time n separates levels at most max_{l<=n} X_l
    ct_level = np.maximum.accumulate(arr.x)[ct] if ct.size else np.empty(0)
    return CutReport(
        cut_values=vals,
        cut_n0=times,
        cut_strong=arr.strong[times],
        cut_confirmed=top >= vals + W,
        cut_times=ct,
        cut_times_confirmed=top >= ct_level + W,
        separating=_separating(arr, W),
        horizon=traj.horizon,
        W=W,
        top=top,
    )


def detect_cutpoints(traj, W=None):
    """Cutpoints and strong cutpoints of a scalar path.

    ``x = X_{n0}`` is a cutpoint iff ``X_n <= x`` for ``n <= n0`` and
    ``X_n > x`` for ``n0 < n <= N``; it is strong iff moreover ``X_n < x``
    for ``n < n0``.  Status is CONFIRMED iff ``max X >= x + W``.

    Parameters
    ----------
    traj : ScalarTrajectory or array_like
    W : float, optional
        Confirmation window (default ``50 B``; ``B`` is the declared jump
        bound or, for ingested paths, the largest observed increment).

    Returns
    -------
    CutReport
        Also carries cut times and the separating set, which come from the
        same prefix/suffix arrays.
    """
    traj = _scalar(traj)
    return _report(traj, _window(traj, W))


def detect_cut_times(traj, W=None):
    """Cut times ``n < N`` with ``max_{l<=n} X_l < min_{m>n} X_m``.

    Returns
    -------
    times : ndarray of int
    confirmed : ndarray of bool
        CONFIRMED iff the path climbs ``W`` above ``max_{l<=n} X_l``.
    """
    rep = detect_cutpoints(traj, W)
    return rep.cut_times, rep.cut_times_confirmed


# ---------------------------------------------------------------------------
# cut intervals and annuli
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class CutInterval:
    """An interval ``[l, r]`` whose interior visits are all strong cutpoints."""

    l: float
    r: float
    k_obs: int
    points: tuple
    status: str

    @property
    def length(self):
        return self.r - self.l


@dataclass(frozen=True)
class CutAnnulus:
    """Radii ``[l, r]`` crossed once, with strictly increasing interior norms."""

    l: float
    r: float
    entry_time: int | None
    visits: int
    status: str


def _gaps(arr):
    n1 = arr.x.size
    top = float(arr.x.max())
    gl = np.empty(n1 + 1)
    gr = np.empty(n1 + 1)
    cnt = np.empty(n1 + 1, dtype=np.int64)
    first = np.empty(n1 + 1, dtype=np.int64)
    g, sv = core.cut_gaps(arr.x, arr.strong, top, gl, gr, cnt, first)
    return gl[:g], gr[:g], cnt[:g], first[:g], sv, top


def _check_hk(h, k):
    h = float(h)
    if not h > 0:
        raise ValueError("h must be > 0")
    if int(k) != k or k < 0:
        raise ValueError("k must be an integer >= 0")
    return h, int(k)


def detect_cut_intervals(traj, h, k, W=None, disjoint=False):
    """Maximal (or greedily packed disjoint) (h, k) cut intervals.

    A maximal interval is a gap between consecutive "obstructions" -- the
    point 0, every visited value that is not a strong cutpoint, and the path
    maximum -- so every visit in its interior is a strong cutpoint.  Gaps of
    length ``>= h`` with ``>= k`` interior visits are returned.

    Parameters
    ----------
    traj : ScalarTrajectory or array_like
    h : float
        Minimum length, ``> 0``.
    k : int
        Minimum number of interior visits, ``>= 0``.
    W : float, optional
        Confirmation window; an interval is CONFIRMED iff ``max X >= r + W``.
    disjoint : bool, default False
        If True, split each maximal interval greedily into as many disjoint
        (h, k) pieces (earliest right end first; a piece that needs its
        ``k``-th point ends halfway to the next visited value).

    Returns
    -------
    list of CutInterval
    """
    traj = _scalar(traj)
    h, k = _check_hk(h, k)
    W = _window(traj, W)
    arr = _arrays(traj)
    gl, gr, cnt, first, sv, top = _gaps(arr)
    out = []
    if not disjoint:
        for l, r, c, f in zip(gl, gr, cnt, first):
            if r - l >= h and c >= k:
                st = CONFIRMED if top >= r + W else CANDIDATE
                out.append(CutInterval(float(l), float(r), int(c),
                                       tuple(sv[f:f + c].tolist()), st))
        return out
    n = sv.size + gl.size + 1
    n = int(n + (top // h if h > 0 else 0) + 1) if k == 0 else n
    pl = np.empty(n)
    pr = np.empty(n)
    pc = np.empty(n, dtype=np.int64)
    m = core.greedy_pieces(sv, gl, gr, cnt, first, h, k, pl, pr, pc)
    for l, r, c in zip(pl[:m], pr[:m], pc[:m]):
        pts = sv[(sv > l) & (sv < r)]
        st = CONFIRMED if top >= r + W else CANDIDATE
        out.append(CutInterval(float(l), float(r), int(c), tuple(pts.tolist()), st))
    return out


def count_disjoint_cut_intervals(traj, h, k, checkpoints, W=None):
    """Greedy disjoint (h, k) cut-interval counts with right end ``<= x``.

    Returns
    -------
    confirmed, candidate : ndarray of int
        One entry per checkpoint.
    """
    pieces = detect_cut_intervals(traj, h, k, W, disjoint=True)
    r = np.array([p.r for p in pieces])
    conf = np.array([p.status == CONFIRMED for p in pieces], dtype=bool)
    cps = np.asarray(checkpoints, dtype=np.float64)
    cand = np.array([(r <= x).sum() for x in cps], dtype=np.int64)
    cf = np.array([((r <= x) & conf).sum() for x in cps], dtype=np.int64)
    return cf, cand


def detect_cut_annuli(vtraj, h, k, W=None, disjoint=False):
    """(h, k) cut annuli of a vector path.

    An annulus ``{l < |z| < r}`` qualifies when the path, after living in the
    closed ball of radius ``l``, crosses it in consecutive visits with
    strictly increasing norms and afterwards stays outside radius ``r``.
    These are exactly the cut intervals of the norm process; the strict
    monotonicity is re-checked explicitly (equal consecutive norms would
    disqualify an annulus).

    Returns
    -------
    list of CutAnnulus
    """
    vtraj = as_trajectory(vtraj)
    if not isinstance(vtraj, VectorTrajectory):
        raise TypeError("detect_cut_annuli needs a vector trajectory (d >= 2)")
    norms = vtraj.norms()
    R = norms.positions
    out = []
    for ci in detect_cut_intervals(norms, h, k, W, disjoint=disjoint):
        inside = np.flatnonzero((R > ci.l) & (R < ci.r))
        if inside.size:
            m = int(inside[0])
            consecutive = np.all(np.diff(inside) == 1)
            increasing = np.all(np.diff(R[inside]) > 0)
            before = np.all(R[:m] <= ci.l)
            after = np.all(R[inside[-1] + 1:] >= ci.r)
            if not (consecutive and increasing and before and after):
                continue
        else:
            m = None
        out.append(CutAnnulus(ci.l, ci.r, m, int(inside.size), ci.status))
    return out


# ---------------------------------------------------------------------------
# the event A_x
# ---------------------------------------------------------------------------

def ax_spacing(ell, epsilon):
    """Grid spacing ``q = max(1, 2 ell epsilon)``."""
    return max(1.0, 2.0 * ell * epsilon)


@dataclass(frozen=True)
class AxResult:
    x: np.ndarray
    flagged: np.ndarray
    confirmed: np.ndarray
    eta: np.ndarray  # -1 where eta_{n,x} is not attained
    interval_top: np.ndarray


def detect_Ax_events(traj, epsilon, ell, n=0, x_grid=None, W=None, jump_bound=None,
                     h=None, k=None):
    """Flag the events ``A_x`` on a grid of levels.

    ``A_x`` holds when, at ``eta = eta_{n,x}`` (first time ``>= n`` above
    ``x``), the next ``2 ell`` increments all exceed ``epsilon`` and the path
    never re-enters ``[0, x + ell epsilon]`` afterwards (up to the horizon).
    A flagged event is CONFIRMED iff ``max X >= x + ell epsilon + W``.

    Parameters
    ----------
    traj : ScalarTrajectory or array_like
    epsilon : float
    ell : int
    n : int
        Start time.
    x_grid : array_like, optional
        Levels; default ``{q, 2q, ...}`` above ``X_0 + B n`` up to ``max X``.
    W : float, optional
    jump_bound : float, optional
        ``B``; defaults to the trajectory's declared bound or the largest
        observed increment.
    h, k : optional
        If given, ``ell epsilon > max(h, B k)`` is enforced.

    Raises
    ------
    ValueError
        If a grid level is ``<= X_0 + B n`` or the (h, k) condition fails.
    """
    traj = _scalar(traj)
    x = traj.positions
    N = traj.horizon
    epsilon = float(epsilon)
    if not epsilon > 0:
        raise ValueError("epsilon must be > 0")
    if int(ell) != ell or ell < 1:
        raise ValueError("ell must be a positive integer")
    ell = int(ell)
    n = int(n)
    if not 0 <= n <= N:
        raise ValueError("start time n must lie in [0, N]")
    if jump_bound is None:
        jump_bound = traj.jump_bound
    if jump_bound is None:
        inc = np.abs(np.diff(x))
        jump_bound = float(inc.max()) if inc.size else 1.0
    B = float(jump_bound)
    if h is not None or k is not None:
        hh = 0.0 if h is None else float(h)
        kk = 0 if k is None else int(k)
        if not ell * epsilon > max(hh, B * kk):
            raise ValueError("need ell * epsilon > max(h, B k)")
    W = _window(traj, W)
    floor = x[0] + B * n
    if x_grid is None:
        q = ax_spacing(ell, epsilon)
        j0 = int(np.floor(floor / q)) + 1
        j1 = int(np.floor(x.max() / q))
        x_grid = q * np.arange(j0, max(j1, j0 - 1) + 1)
    xs = np.atleast_1d(np.asarray(x_grid, dtype=np.float64))
    if xs.size and np.any(xs <= floor):
        raise ValueError(f"grid levels must exceed X_0 + B n = {floor}")
    top = float(x.max())
    inc = np.diff(x)
    # run[m] = number of consecutive increments > epsilon starting at step m
    big = inc > epsilon
    run = np.zeros(inc.size + 1, dtype=np.int64)
    for m in range(inc.size - 1, -1, -1):
        run[m] = run[m + 1] + 1 if big[m] else 0
    sufmin = np.minimum.accumulate(x[::-1])[::-1]
    # first passage above each level from time n: prefix max from n
    pm = np.maximum.accumulate(x[n:])
    flagged = np.zeros(xs.size, dtype=bool)
    eta = np.full(xs.size, -1, dtype=np.int64)
    for i, lev in enumerate(xs):
        j = int(np.searchsorted(pm, lev, side="right"))
        if j >= pm.size:
            continue
        e = n + j
        eta[i] = e
        if e + 2 * ell > N or run[e] < 2 * ell:
            continue
        flagged[i] = sufmin[e + 2 * ell] > lev + ell * epsilon
    itop = xs + ell * epsilon
    confirmed = flagged & (top >= itop + W)
    return AxResult(xs, flagged, confirmed, eta, itop)


def is_cut_interval(traj, l, r, h, k):
    """Direct check that ``[l, r]`` is an (h, k) cut interval of ``traj`` (finite horizon)."""
    traj = _scalar(traj)
    arr = _arrays(traj)
    inside = (arr.x > l) & (arr.x < r)
    return bool(r - l >= h and inside.sum() >= k and np.all(arr.strong[inside]))
