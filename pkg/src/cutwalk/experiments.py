"""Batch experiments: cutpoint growth, dyadic-block statistics, A_x frequencies, annuli.

Every experiment is a pure function of an :class:`ExperimentConfig`; replica
``r`` always uses RNG stream ``(seed, r)``, so results regenerate exactly
from the echoed config.  Results are tables (one row per checkpoint or block)
plus fit diagnostics, written as CSV with a JSON manifest.
"""
from __future__ import annotations

import csv
import dataclasses
import io
import json
import math
import platform
import time
from dataclasses import dataclass, field

import numpy as np
from scipy import stats

from . import __version__
from .cuts import (CONFIRMED, ax_spacing, count_disjoint_cut_intervals, detect_Ax_events,
                   detect_cut_annuli, detect_cutpoints, default_window)
from .generators import make_spec
from .ladder import LadderSampler
from .process import simulate
from .trajectory import format_float

DEFAULT_CHECKPOINTS = tuple(2 ** j for j in range(7, 18))
FIT_MODELS = ("log", "loglog", "reciprocal-log2")


# ---------------------------------------------------------------------------
# config / result
# ---------------------------------------------------------------------------

@dataclass
class ExperimentConfig:
    """Parameters of one experiment run.

    Attributes
    ----------
    generator : dict
        Generator config map, e.g. ``{"family": "bd_lamperti", "a": 2.0}``.
    replicas : int
    steps : int
        Steps per replica for directly simulated experiments.
    seed : int
    h, k : float, int
        Cut-interval / annulus parameters.
    epsilon, ell : float, int
        A_x parameters.
    W : float or None
        Confirmation window (default ``50 B``).
    checkpoints : list of float
        Increasing levels (dyadic ``2^7 .. 2^17`` by default).
    x0 : float
        Start point (radius for vector generators).
    j_lo, j_hi : int
        Dyadic block range for block statistics.
    burn_in : int
        First block index used by the trend test.
    method : {"auto", "direct", "ladder"}
        Block statistics: the exact level-skeleton sampler ("ladder", birth-death
        only) or direct simulation; "auto" picks the ladder when available.
    exploratory : bool
        Allow generators the experiment would otherwise refuse.
    out : str or None
        Output directory.
    """

    generator: dict
    replicas: int = 200
    steps: int = 1_000_000
    seed: int = 12345
    h: float = 1.0
    k: int = 1
    epsilon: float = 0.5
    ell: int = 3
    W: float | None = None
    checkpoints: list = field(default_factory=lambda: list(DEFAULT_CHECKPOINTS))
    x0: float = 0.0
    j_lo: int = 7
    j_hi: int = 17
    burn_in: int = 10
    method: str = "auto"
    exploratory: bool = False
    out: str | None = None

    def __post_init__(self):
        cps = [float(c) for c in self.checkpoints]
        if not cps or any(b <= a for a, b in zip(cps, cps[1:])):
            raise ValueError("checkpoints must be a nonempty increasing list")
        self.checkpoints = cps
        if int(self.replicas) < 1:
            raise ValueError("replicas must be >= 1")
        if int(self.steps) < 1:
            raise ValueError("steps must be >= 1")
        if self.method not in ("auto", "direct", "ladder"):
            raise ValueError("method must be auto, direct or ladder")
        if self.j_hi < self.j_lo:
            raise ValueError("j_hi must be >= j_lo")

    @classmethod
    def from_dict(cls, d):
        names = {f.name for f in dataclasses.fields(cls)}
        unknown = set(d) - names
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        return cls(**d)

    @classmethod
    def from_json(cls, path):
        with open(path) as fh:
            return cls.from_dict(json.load(fh))

    def to_dict(self):
        return dataclasses.asdict(self)

    def spec(self):
        return make_spec(self.generator)

    def window(self, spec):
        return default_window(spec.jump_bound) if self.W is None else float(self.W)


@dataclass
class ExperimentResult:
    """Table of per-checkpoint statistics plus fits and the config echo."""

    name: str
    columns: list
    rows: list
    fits: dict
    diagnostics: dict
    config: dict

    def column(self, name):
        i = self.columns.index(name)
        return np.array([r[i] for r in self.rows])

    def to_csv(self):
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(self.columns)
        for r in self.rows:
            w.writerow([_fmt(v) for v in r])
        return buf.getvalue()


def _fmt(v):
    if isinstance(v, (bool, np.bool_)):
        return int(v)
    if isinstance(v, (int, np.integer)):
        return int(v)
    if isinstance(v, (float, np.floating)):
        return format_float(float(v)) if float(v).is_integer() else repr(float(v))
    return v


def versions():
    import numba
    import scipy
    import sklearn

    return {"cutwalk": __version__, "python": platform.python_version(),
            "numpy": np.__version__, "scipy": scipy.__version__,
            "numba": numba.__version__, "scikit-learn": sklearn.__version__}


def write_outputs(out_dir, tables, config, started, command, extra=None):
    """Write each ``name -> csv text`` table and ``manifest.json`` into ``out_dir``."""
    import os

    os.makedirs(out_dir, exist_ok=True)
    files = []
    for name, text in tables.items():
        path = os.path.join(out_dir, f"{name}.csv")
        with open(path, "w", newline="") as fh:
            fh.write(text)
        files.append(f"{name}.csv")
    finished = time.time()
    manifest = {
        "command": command,
        "config": config,
        "versions": versions(),
        "files": files,
        "started": time.strftime("%Y-%m-%dT%H:%M:%SZ", time.gmtime(started)),
        "finished": time.strftime("%Y-%m-%dT%H:%M:%SZ", time.gmtime(finished)),
        "wall_clock_seconds": round(finished - started, 3),
    }
    manifest.update(extra or {})
    with open(os.path.join(out_dir, "manifest.json"), "w") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True, default=_json_default)
        fh.write("\n")
    return manifest


def _json_default(o):
    if isinstance(o, np.integer):
        return int(o)
    if isinstance(o, np.floating):
        return float(o)
    if isinstance(o, np.ndarray):
        return o.tolist()
    raise TypeError(f"not serialisable: {type(o)}")


# ---------------------------------------------------------------------------
# regression
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class LogFit:
    slope: float
    intercept: float
    r2: float
    ci: tuple
    se: float
    n: int
    model: str


def _transform(x, model):
    x = np.asarray(x, dtype=np.float64)
    if model == "log":
        return np.log(x)
    if model == "loglog":
        return np.log(np.log(x))
    if model == "reciprocal-log2":
        return 1.0 / np.log(x) ** 2
    raise ValueError(f"model must be one of {FIT_MODELS}")


def fit_log_growth(points, model="log", level=0.95):
    """Ordinary least squares of ``y`` on a transform of ``x``.

    Parameters
    ----------
    points : sequence of (x, y)
        At least 3 points with ``x`` strictly increasing.
    model : {"log", "loglog", "reciprocal-log2"}
        Regressor ``log x``, ``log log x`` or ``1 / log^2 x``.
    level : float
        Confidence level of the two-sided slope interval (t distribution).

    Returns
    -------
    LogFit

    Raises
    ------
    ValueError
        Fewer than 3 points, non-increasing ``x``, or a degenerate design.
    """
    pts = np.asarray(points, dtype=np.float64)
    if pts.ndim != 2 or pts.shape[1] != 2 or pts.shape[0] < 3:
        raise ValueError("need at least 3 (x, y) points")
    x, y = pts[:, 0], pts[:, 1]
    if np.any(np.diff(x) <= 0):
        raise ValueError("x must be strictly increasing")
    t = _transform(x, model)
    if not np.all(np.isfinite(t)) or np.ptp(t) <= 1e-12 * max(1.0, np.abs(t).max()):
        raise ValueError("degenerate design matrix")
    n = t.size
    tc = t - t.mean()
    sxx = float(tc @ tc)
    slope = float(tc @ (y - y.mean()) / sxx)
    intercept = float(y.mean() - slope * t.mean())
    resid = y - intercept - slope * t
    sse = float(resid @ resid)
    sst = float(((y - y.mean()) ** 2).sum())
    r2 = 1.0 - sse / sst if sst > 0 else 1.0
    se = math.sqrt(sse / (n - 2) / sxx) if n > 2 else math.inf
    q = stats.t.ppf(0.5 + level / 2, n - 2)
    return LogFit(slope, intercept, float(r2), (float(slope - q * se), float(slope + q * se)),
                  se, n, model)


def trend_test(indicators, js, alpha=0.05):
    """One-sided test that block frequencies decrease in ``j``.

    Each replica contributes the OLS slope of its indicators ``1{E_{2^j}}``
    against ``j``; the mean slope is compared with 0 by a z statistic.
    Decreasing trend is accepted when ``z < -z_{1-alpha}``.

    Returns
    -------
    dict with ``slope``, ``se``, ``z``, ``p_value``, ``decreasing``.
    """
    ind = np.asarray(indicators, dtype=np.float64)
    js = np.asarray(js, dtype=np.float64)
    jc = js - js.mean()
    slopes = ind @ jc / (jc @ jc)
    m = float(slopes.mean())
    se = float(slopes.std(ddof=1) / math.sqrt(slopes.size)) if slopes.size > 1 else math.inf
    if se == 0:
        z = 0.0 if m == 0 else math.copysign(math.inf, m)
    else:
        z = m / se
    p = float(stats.norm.cdf(z))
    return {"slope": m, "se": se, "z": z, "p_value": p,
            "decreasing": bool(z < stats.norm.ppf(alpha))}


# ---------------------------------------------------------------------------
# experiments
# ---------------------------------------------------------------------------

def _reach_fraction(tops, levels, W):
    tops = np.asarray(tops)
    return np.array([(tops >= x + W).mean() for x in levels])


def run_cutpoint_growth(config):
    """Mean strong-cutpoint and disjoint cut-interval counts below each checkpoint.

    CONFIRMED counts (undercount) and CANDIDATE counts (overcount) bracket the
    infinite-horizon value.  The log-growth fit uses the mean CONFIRMED
    strong-cutpoint count over the checkpoints that at least 90% of replicas
    climbed ``W`` above.

    Raises
    ------
    ValueError
        For recurrent-tagged generators (unless ``exploratory``).
    """
    spec = config.spec()
    if spec.regime_tag != "transient-many-cutpoints" and not config.exploratory:
        raise ValueError(f"{spec.spec_id} is tagged {spec.regime_tag}; "
                         "cutpoint growth needs a transient-many-cutpoints generator")
    W = config.window(spec)
    cps = np.asarray(config.checkpoints)
    R = int(config.replicas)
    sc = np.zeros((R, cps.size), np.int64)
    sa = np.zeros((R, cps.size), np.int64)
    ic = np.zeros((R, cps.size), np.int64)
    ia = np.zeros((R, cps.size), np.int64)
    tops = np.zeros(R)
    for r in range(R):
        traj = simulate(spec, config.x0, config.steps, config.seed, replica=r)
        if traj.dimension > 1:
            traj = traj.norms()
        rep = detect_cutpoints(traj, W)
        tops[r] = rep.top
        sv = rep.cut_values[rep.cut_strong]
        sconf = rep.cut_confirmed[rep.cut_strong]
        sa[r] = np.searchsorted(np.sort(sv), cps, side="right")
        sc[r] = np.searchsorted(np.sort(sv[sconf]), cps, side="right")
        ic[r], ia[r] = count_disjoint_cut_intervals(traj, config.h, config.k, cps, W)
    reach = _reach_fraction(tops, cps, W)
    cols = ["x", "strong_confirmed", "strong_candidate", "intervals_confirmed",
            "intervals_candidate", "frac_positive_intervals", "reach_fraction"]
    rows = []
    for i, x in enumerate(cps):
        rows.append([x, sc[:, i].mean(), sa[:, i].mean(), ic[:, i].mean(), ia[:, i].mean(),
                     (ic[:, i] > 0).mean(), reach[i]])
    fits = {}
    use = reach >= 0.9
    diag = {"fit_checkpoints": cps[use].tolist(), "W": W, "max_mean": float(tops.mean())}
    if use.sum() >= 3:
        f = fit_log_growth(list(zip(cps[use], sc[:, use].mean(0))), "log")
        fits["strong_confirmed_vs_log"] = dataclasses.asdict(f)
    return ExperimentResult("cutpoint_growth", cols, rows, fits, diag, config.to_dict())


def _use_ladder(config, spec):
    if config.method == "direct":
        return False
    try:
        from .ladder import _nn_chain
        _nn_chain(spec)
        ok = True
    except TypeError:
        ok = False
    if config.method == "ladder" and not ok:
        raise ValueError("the ladder method needs a nearest-neighbour birth-death generator")
    return ok


def run_dyadic_block_stats(config):
    """``P(E_x)``, mean ``M_x`` and mean ``M_x 1{E_x}`` per dyadic block ``x = 2^j``.

    ``E_x = {#(C cap [x, 2x]) >= 1}`` and ``M_x = |S cap [x/2, 2x]|``.  With
    the ladder method the statistics refer to the infinite path; with direct
    simulation CONFIRMED cutpoints and the confirmed separating set are used.
    Also reports the one-sided decreasing-trend test over blocks
    ``j >= burn_in`` and a fit of ``P(E_x)`` against ``1/log^2 x``.
    """
    spec = config.spec()
    js = np.arange(config.j_lo, config.j_hi + 1)
    R = int(config.replicas)
    if _use_ladder(config, spec):
        method = "ladder"
        top = 2 ** (config.j_hi + 1)
        start = max(int(config.x0), spec.x_floor)
        first = max(start, 2 ** (config.j_lo - 1))
        lad = LadderSampler(spec, top, start=start, first_level=first)
        hit, mx, ncut = lad.block_stats(config.seed, R, config.j_lo, config.j_hi)
    else:
        method = "direct"
        W = config.window(spec)
        hit = np.zeros((R, js.size), bool)
        mx = np.zeros((R, js.size))
        ncut = np.zeros((R, js.size), np.int64)
        for r in range(R):
            traj = simulate(spec, config.x0, config.steps, config.seed, replica=r)
            if traj.dimension > 1:
                traj = traj.norms()
            rep = detect_cutpoints(traj, W)
            cv = rep.cut_values[rep.cut_confirmed]
            S = rep.separating
            lim = S.top - S.W
            for i, j in enumerate(js):
                x = 2.0 ** j
                c = int(((cv >= x) & (cv <= 2 * x)).sum())
                ncut[r, i] = c
                hit[r, i] = c >= 1
                mx[r, i] = S.measure(x / 2, min(2 * x, lim)) if lim > x / 2 else 0.0
    pe = hit.mean(0)
    cols = ["j", "x", "p_E", "p_E_se", "mean_M", "mean_M_E", "mean_cuts"]
    rows = []
    for i, j in enumerate(js):
        se = math.sqrt(pe[i] * (1 - pe[i]) / R)
        rows.append([int(j), 2 ** int(j), pe[i], se, mx[:, i].mean(),
                     (mx[:, i] * hit[:, i]).mean(), ncut[:, i].mean()])
    sel = js >= config.burn_in
    diag = {"method": method, "replicas": R}
    fits = {}
    if sel.sum() >= 2:
        diag["trend"] = trend_test(hit[:, sel], js[sel])
    if sel.sum() >= 3:
        xs = 2.0 ** js[sel]
        fits["p_E_vs_reciprocal_log2"] = dataclasses.asdict(
            fit_log_growth(list(zip(xs, pe[sel])), "reciprocal-log2"))
        # envelope constant for mean M_x <= C / log x
        diag["M_envelope_C"] = float(np.max(mx[:, sel].mean(0) * np.log(xs)))
    return ExperimentResult("dyadic_blocks", cols, rows, fits, diag, config.to_dict())


def run_Ax_frequency(config):
    """Block-pooled frequency of ``A_{qx}`` on the default grid ``{q, 2q, ...}``.

    For each block ``[2^j, 2^(j+1))`` of checkpoints the statistic is the mean
    over replicas and grid levels of ``x 1{A_x}`` (and of
    ``x log x 1{A_x}``); under ``P(A_x) ~ c/x`` the first is flat in ``j``.
    Only levels that at least 90% of replicas climb ``W`` above enter, and
    only CONFIRMED events count.

    Raises
    ------
    ValueError
        If ``ell * epsilon <= max(h, B k)``.
    """
    spec = config.spec()
    B = spec.jump_bound
    eps, ell = float(config.epsilon), int(config.ell)
    if not ell * eps > max(config.h, B * config.k):
        raise ValueError("need ell * epsilon > max(h, B k)")
    W = config.window(spec)
    q = ax_spacing(ell, eps)
    R = int(config.replicas)
    js = np.arange(config.j_lo, config.j_hi + 1)
    lo = 2.0 ** js[0]
    hi = 2.0 ** (js[-1] + 1)
    floor = config.x0
    grid = q * np.arange(max(1, int(np.floor(max(lo, floor) / q)) + 1), int(hi // q) + 1)
    grid = grid[(grid > floor) & (grid >= lo) & (grid < hi)]
    flags = np.zeros((R, grid.size), bool)
    tops = np.zeros(R)
    for r in range(R):
        traj = simulate(spec, config.x0, config.steps, config.seed, replica=r)
        if traj.dimension > 1:
            traj = traj.norms()
        res = detect_Ax_events(traj, eps, ell, n=0, x_grid=grid, W=W, jump_bound=B,
                               h=config.h, k=config.k)
        flags[r] = res.confirmed
        tops[r] = traj.positions.max()
    reach = _reach_fraction(tops, grid + ell * eps, W)
    cols = ["j", "x", "levels", "events", "p_A", "x_p_A", "xlogx_p_A", "reach_fraction"]
    rows = []
    for j in js:
        m = (grid >= 2.0 ** j) & (grid < 2.0 ** (j + 1))
        ok = m & (reach >= 0.9)
        if not ok.any():
            rows.append([int(j), 2 ** int(j), 0, 0, float("nan"), float("nan"), float("nan"),
                         float(reach[m].min()) if m.any() else 0.0])
            continue
        g = grid[ok]
        f = flags[:, ok]
        rows.append([int(j), 2 ** int(j), int(ok.sum()), int(f.sum()), float(f.mean()),
                     float((f * g).mean()), float((f * g * np.log(g)).mean()),
                     float(reach[ok].min())])
    xp = np.array([r[5] for r in rows], dtype=float)
    good = np.isfinite(xp) & (xp > 0)
    diag = {"q": q, "W": W, "grid_levels": int(grid.size)}
    if good.any():
        w = float(np.median(xp[good]))
        diag["x_p_A_median"] = w
        diag["x_p_A_window_stable"] = bool(np.all((xp[good] >= w / 3) & (xp[good] <= 3 * w)))
        xl = np.array([r[6] for r in rows], dtype=float)[good]
        wl = float(np.median(xl))
        diag["xlogx_p_A_median"] = wl
        diag["xlogx_p_A_window_stable"] = bool(np.all((xl >= wl / 3) & (xl <= 3 * wl)))
    return ExperimentResult("ax_frequency", cols, rows, {}, diag, config.to_dict())


def run_annuli_experiment(config, burn_in_radius=100.0):
    """Confirmed (h, k) cut annuli per checkpoint radius for a vector generator.

    For each checkpoint ``R_c``: fraction of replicas with at least one
    CONFIRMED annulus of inner radius ``<= R_c`` and the mean count.  Also
    reports the fraction of replicas with no confirmed annulus of inner
    radius ``>= burn_in_radius``.

    Raises
    ------
    ValueError
        For scalar generators, and for generators tagged unclassified
        (``2U = V``) unless ``exploratory``.
    """
    spec = config.spec()
    if not spec.vector or spec.dimension < 2:
        raise ValueError("annuli need a vector generator with d >= 2")
    if spec.regime_tag == "unclassified" and not config.exploratory:
        raise ValueError(f"{spec.spec_id} is unclassified (2U = V); pass exploratory")
    W = config.window(spec)
    cps = np.asarray(config.checkpoints)
    R = int(config.replicas)
    counts = np.zeros((R, cps.size), np.int64)
    beyond = np.zeros(R, np.int64)
    for r in range(R):
        traj = simulate(spec, config.x0, config.steps, config.seed, replica=r)
        ann = detect_cut_annuli(traj, config.h, config.k, W)
        ls = np.sort([a.l for a in ann if a.status == CONFIRMED])
        counts[r] = np.searchsorted(ls, cps, side="right")
        beyond[r] = int((ls >= burn_in_radius).sum())
    cols = ["radius", "frac_positive", "mean_count"]
    rows = [[x, (counts[:, i] > 0).mean(), counts[:, i].mean()] for i, x in enumerate(cps)]
    diag = {"W": W, "burn_in_radius": burn_in_radius,
            "frac_none_beyond_burn_in": float((beyond == 0).mean()),
            "regime_tag": spec.regime_tag}
    return ExperimentResult("annuli", cols, rows, {}, diag, config.to_dict())


EXPERIMENTS = {
    "cutpoint_growth": run_cutpoint_growth,
    "dyadic_blocks": run_dyadic_block_stats,
    "ax_frequency": run_Ax_frequency,
    "annuli": run_annuli_experiment,
}
