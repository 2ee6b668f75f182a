"""Process specifications, simulation and moment-profile bookkeeping.

A :class:`ProcessSpec` couples a compiled one-step sampler with the
:class:`MomentProfile` it declares: lower/upper envelopes for the first two
conditional increment moments of the scalar process and a jump bound ``B``.
The functions here simulate specs reproducibly and check empirically that a
spec's samples are consistent with its declared profile.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy import stats

from . import _kernels as K
from ._rng import check_seed, stream_keys
from .trajectory import ScalarTrajectory, VectorTrajectory, as_trajectory

#: Largest number of steps a single :func:`simulate` call may allocate.
MAX_STEPS = 50_000_000

REGIMES = ("transient-many-cutpoints", "critical-window", "recurrent", "unclassified")


@dataclass(frozen=True)
class MomentProfile:
    """Declared bounds on the conditional increment moments.

    ``mu1_lower(x) <= E[Delta | X = x] <= mu1_upper(x)`` and likewise for
    ``E[Delta^2 | X = x]``.  All four callables must accept numpy arrays.

    Parameters
    ----------
    mu1_lower, mu1_upper, mu2_lower, mu2_upper : callable
        Vectorised functions of position ``x >= 0``.
    jump_bound : float
        ``B`` with ``|Delta| <= B`` almost surely.
    regime_tag : str
        One of :data:`REGIMES`.
    """

    mu1_lower: Callable
    mu1_upper: Callable
    mu2_lower: Callable
    mu2_upper: Callable
    jump_bound: float
    regime_tag: str = "unclassified"

    def __post_init__(self):
        if not self.jump_bound > 0:
            raise ValueError("jump bound must be positive")
        if self.regime_tag not in REGIMES:
            raise ValueError(f"unknown regime tag {self.regime_tag!r}")

    def evaluate(self, x):
        """Return the four envelopes at ``x`` as a tuple of float arrays."""
        x = np.asarray(x, dtype=np.float64)
        return tuple(np.broadcast_to(np.asarray(f(x), dtype=np.float64), x.shape).copy()
                     for f in (self.mu1_lower, self.mu1_upper,
                               self.mu2_lower, self.mu2_upper))

    def check(self, x):
        """Assert the ordering invariants on a grid ``x``; returns True or raises."""
        l1, u1, l2, u2 = self.evaluate(x)
        B2 = self.jump_bound ** 2
        tol = 1e-12
        if np.any(l1 > u1 + tol):
            raise AssertionError("mu1_lower exceeds mu1_upper")
        if np.any(l2 < -tol) or np.any(l2 > u2 + tol) or np.any(u2 > B2 * (1 + tol)):
            raise AssertionError("mu2 envelopes violate 0 <= lower <= upper <= B^2")
        return True


class ProcessSpec:
    """A sampleable one-step law plus its declared moment profile.

    Subclasses set the compiled-kernel description (``kind``, ``prm``) and
    implement :meth:`initial_state`.  Instances are immutable value objects.

    Attributes
    ----------
    family : str
        Registry name (e.g. ``"bd_lamperti"``).
    params : dict
        Parameters as given in a config map (echoed in manifests).
    profile : MomentProfile
    dimension : int
        1 for scalar specs, ``d`` for vector specs.
    lattice : bool
        Whether positions are integers (scalar) / lattice points (vector).
    """

    family = "abstract"
    kind = -1
    dimension = 1
    lattice = False
    vector = False

    def __init__(self, params, profile, prm):
        self._params = dict(params)
        self.profile = profile
        prm = np.asarray(prm, dtype=np.float64)
        prm.setflags(write=False)
        self._prm = prm

    @property
    def params(self):
        return dict(self._params)

    @property
    def prm(self):
        return self._prm

    @property
    def jump_bound(self):
        return self.profile.jump_bound

    @property
    def regime_tag(self):
        return self.profile.regime_tag

    @property
    def spec_id(self):
        inner = ",".join(f"{k}={self._params[k]}" for k in sorted(self._params))
        return f"{self.family}({inner})"

    def to_config(self):
        cfg = {"family": self.family}
        cfg.update(self._params)
        return cfg

    def __repr__(self):
        return self.spec_id

    def __eq__(self, other):
        return isinstance(other, ProcessSpec) and self.to_config() == other.to_config()

    def __hash__(self):
        return hash(self.spec_id)

    # -- state handling -------------------------------------------------
    def initial_state(self, x0):
        """Return ``(kernel_state, scalar_position)`` for a start point ``x0``.

        Raises ValueError if ``x0`` is not in the state set.
        """
        raise NotImplementedError

    def contains(self, x0):
        try:
            self.initial_state(x0)
        except (ValueError, TypeError):
            return False
        return True

    def vector_columns(self):
        """Number of leading kernel-state entries that form the vector position."""
        return self.dimension if self.vector else 0

    def transition(self, x):
        """Finite-support one-step law of the scalar position from ``x``.

        Returns ``(targets, probabilities)``; raises TypeError for specs with
        continuous support.
        """
        raise TypeError(f"{self.family} has no finite-support scalar kernel")

    def step(self, x, seed, replica=0):
        """Sample one step from ``x`` (scalar position, or point for vector specs)."""
        state, pos = self.initial_state(x)
        keys = stream_keys(seed)
        nv = self.vector_columns()
        vec = np.empty((2 if nv else 0, max(nv, 1)))
        path = K.simulate_path(self.kind, self._prm, state, pos, 1, keys, int(replica), vec)
        return vec[1].copy() if nv else float(path[1])


def simulate(spec, x0, n_steps, seed, replica=0, max_steps=MAX_STEPS):
    """Simulate ``n_steps`` steps of ``spec`` from ``x0``.

    Parameters
    ----------
    spec : ProcessSpec
    x0 : float or array_like
        Start point in the spec's state set.
    n_steps : int
        Number of steps ``N``; the result has ``N + 1`` positions.
    seed : int
        64-bit seed.  Replica ``replica`` of seed ``seed`` always produces the
        same path.
    replica : int, optional
        Replica index within the run.
    max_steps : int, optional
        Memory budget; larger requests are rejected.

    Returns
    -------
    ScalarTrajectory or VectorTrajectory
    """
    seed = check_seed(seed)
    n_steps = int(n_steps)
    if n_steps < 0:
        raise ValueError("n_steps must be >= 0")
    if n_steps > max_steps:
        raise ValueError(f"n_steps={n_steps} exceeds the memory budget of {max_steps} steps")
    state, pos0 = spec.initial_state(x0)
    keys = stream_keys(seed)
    nv = spec.vector_columns()
    vec = np.empty((n_steps + 1 if nv else 0, max(nv, 1)))
    pos = K.simulate_path(spec.kind, spec.prm, state, pos0, n_steps, keys, int(replica), vec)
    if nv:
        return VectorTrajectory(vec, seed=seed, spec_id=spec.spec_id,
                                jump_bound=spec.jump_bound, lattice=spec.lattice)
    return ScalarTrajectory(pos, seed=seed, spec_id=spec.spec_id,
                            jump_bound=spec.jump_bound, lattice=spec.lattice)


# ---------------------------------------------------------------------------
# empirical moments
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class IncrementMoments:
    """Per-bin sample moments of increments, indexed by the origin bin.

    ``mean_origin`` is the average origin position in each bin and
    ``mean_scaled`` the average of ``2 X_n Delta_n``.  Empty bins hold NaN.
    """

    edges: np.ndarray
    count: np.ndarray
    mean: np.ndarray
    mean_sq: np.ndarray
    se_mean: np.ndarray
    se_sq: np.ndarray
    mean_origin: np.ndarray
    mean_scaled: np.ndarray
    bin_index: np.ndarray = field(repr=False, default=None)


def _bin_origins(x, edges):
    edges = np.asarray(edges, dtype=np.float64)
    if edges.ndim != 1 or edges.size < 2 or np.any(np.diff(edges) <= 0):
        raise ValueError("bins must be a strictly increasing array of >= 2 edges")
    if x.size and (x.min() < edges[0] or x.max() > edges[-1]):
        raise ValueError("bins do not cover the trajectory's range")
    idx = np.searchsorted(edges, x, side="right") - 1
    idx = np.minimum(idx, edges.size - 2)
    return edges, idx


def empirical_increment_moments(traj, bins):
    """Sample moments of the increments grouped by the bin of their origin.

    Parameters
    ----------
    traj : ScalarTrajectory, VectorTrajectory or array_like
        Vector trajectories are analysed through their norm process.
    bins : array_like
        Bin edges; bin ``i`` is ``[edges[i], edges[i+1])`` and the last bin
        is closed on the right.

    Returns
    -------
    IncrementMoments
        Counts sum to the number of increments ``N``.
    """
    traj = as_trajectory(traj)
    if isinstance(traj, VectorTrajectory):
        traj = traj.norms()
    x = traj.positions
    if x.size < 2:
        raise ValueError("trajectory has no increments")
    origin = x[:-1]
    delta = np.diff(x)
    edges, idx = _bin_origins(origin, bins)
    nb = edges.size - 1
    cnt = np.bincount(idx, minlength=nb).astype(np.int64)
    with np.errstate(invalid="ignore", divide="ignore"):
        s1 = np.bincount(idx, weights=delta, minlength=nb)
        s2 = np.bincount(idx, weights=delta ** 2, minlength=nb)
        s4 = np.bincount(idx, weights=delta ** 4, minlength=nb)
        so = np.bincount(idx, weights=origin, minlength=nb)
        ss = np.bincount(idx, weights=2 * origin * delta, minlength=nb)
        m1 = s1 / cnt
        m2 = s2 / cnt
        var1 = np.maximum(m2 - m1 ** 2, 0.0) * cnt / np.maximum(cnt - 1, 1)
        var2 = np.maximum(s4 / cnt - m2 ** 2, 0.0) * cnt / np.maximum(cnt - 1, 1)
        se1 = np.sqrt(var1 / cnt)
        se2 = np.sqrt(var2 / cnt)
        mo = so / cnt
        msc = ss / cnt
    return IncrementMoments(edges, cnt, m1, m2, se1, se2, mo, msc, idx)


def profile_band(traj, bins, profile):
    """Count-weighted average of the profile envelopes over each bin's origins.

    For a Markov chain the expected sample mean of the increments in a bin is
    the average of ``mu1`` over the visited origins, so this (rather than the
    value at the bin midpoint) is the band the sample moments must fall in.

    Returns
    -------
    tuple of arrays
        ``(mu1_lo, mu1_hi, mu2_lo, mu2_hi)`` per bin (NaN for empty bins).
    """
    traj = as_trajectory(traj)
    if isinstance(traj, VectorTrajectory):
        traj = traj.norms()
    origin = traj.positions[:-1]
    if origin.size == 0:
        raise ValueError("trajectory has no increments")
    edges, idx = _bin_origins(origin, bins)
    nb = edges.size - 1
    cnt = np.bincount(idx, minlength=nb)
    out = []
    for env in profile.evaluate(origin):
        with np.errstate(invalid="ignore", divide="ignore"):
            out.append(np.bincount(idx, weights=env, minlength=nb) / cnt)
    return tuple(out)


def moment_consistency(traj, bins, profile, min_count=10_000, n_se=3.0):
    """Per-bin check that sample moments sit inside the declared envelopes.

    Returns a dict of boolean arrays ``ok_mu1``, ``ok_mu2`` and ``tested``
    (bins with at least ``min_count`` increments), plus the moments.
    """
    mom = empirical_increment_moments(traj, bins)
    l1, u1, l2, u2 = profile_band(traj, bins, profile)
    tested = mom.count >= min_count
    ok1 = (mom.mean >= l1 - n_se * mom.se_mean) & (mom.mean <= u1 + n_se * mom.se_mean)
    ok2 = (mom.mean_sq >= l2 - n_se * mom.se_sq) & (mom.mean_sq <= u2 + n_se * mom.se_sq)
    return {"tested": tested, "ok_mu1": ok1 | ~tested, "ok_mu2": ok2 | ~tested,
            "moments": mom, "band": (l1, u1, l2, u2)}


# ---------------------------------------------------------------------------
# ellipticity
# ---------------------------------------------------------------------------

class NoEllipticityError(ValueError):
    """No grid value ``epsilon`` satisfied ``P(Delta >= epsilon) >= epsilon``."""


@dataclass(frozen=True)
class EllipticityResult:
    epsilon: float
    table: list  # rows: (x, epsilon, p_hat, lower_99)


def _cp_lower(k, n, alpha=0.01):
    """One-sided Clopper-Pearson lower confidence bound."""
    k = np.asarray(k)
    with np.errstate(invalid="ignore"):
        lo = stats.beta.ppf(alpha, k, n - k + 1)
    return np.where(k == 0, 0.0, lo)


def verify_ellipticity(spec, x_range, samples, seed, j_max=20):
    """Find the largest ``epsilon = B / 2**j`` with ``P(Delta >= epsilon) >= epsilon``.

    The probability is lower-bounded at one-sided 99% confidence (Clopper-Pearson)
    from ``samples`` one-step draws at every ``x`` in ``x_range``.

    Returns
    -------
    EllipticityResult

    Raises
    ------
    NoEllipticityError
        If even ``B / 2**j_max`` fails somewhere.
    """
    samples = int(samples)
    if samples < 1:
        raise ValueError("samples must be >= 1")
    xs = [float(v) for v in np.atleast_1d(np.asarray(x_range, dtype=np.float64))]
    if not xs:
        raise ValueError("x_range is empty")
    keys = stream_keys(seed)
    B = spec.jump_bound
    grid = B / 2.0 ** np.arange(j_max + 1)
    table = []
    passes = np.ones(grid.size, dtype=bool)
    for i, x in enumerate(xs):
        state, pos = spec.initial_state(x)
        inc = K.sample_increments(spec.kind, spec.prm, state, pos, samples, keys, i)
        # tolerance for floating noise in norm increments
        k = np.array([(inc >= e - 1e-12).sum() for e in grid])
        lo = _cp_lower(k, samples)
        ok = lo >= grid
        passes &= ok
        for e, kk, ll in zip(grid, k, lo):
            table.append((x, float(e), kk / samples, float(ll)))
    if not passes.any():
        raise NoEllipticityError(
            f"no epsilon in {{B/2^j : j <= {j_max}}} satisfies P(Delta >= eps) >= eps")
    eps = float(grid[np.argmax(passes)])
    return EllipticityResult(eps, table)


# ---------------------------------------------------------------------------
# regime classification from a profile
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Classification:
    tag: str
    lower_gap: float      # min over tail of 2x mu1_lower - mu2_upper
    upper_gap_log: float  # max over tail of (2x mu1_upper - mu2_lower) log x
    theta: float          # min over tail of log x (2x mu1_lower / mu2_upper - 1) - 1


def classify_profile(profile, x_lo=1e4, x_hi=1e8, n=41, growth=1.5):
    """Numerically classify a profile on a log-spaced tail grid.

    Rules (evaluated on ``x in [x_lo, x_hi]``):

    * transient-many-cutpoints: ``2x mu1_lower - mu2_upper`` is positive on the
      whole grid and does not vanish like ``1/log x`` (its product with
      ``log x`` grows by more than the factor ``growth`` across the grid);
    * critical-window: ``mu1_lower >= 0``, ``(2x mu1_upper - mu2_lower) log x``
      bounded on the grid, and
      ``2x mu1_lower >= (1 + (1 + theta)/log x) mu2_upper`` with ``theta > 0``;
    * recurrent: ``2x mu1_upper - mu2_lower < 0`` on the tail, or the refined
      comparison holds with ``theta < 0`` from above;
    * unclassified otherwise.

    This is a finite-grid heuristic; generator tags are set analytically.
    """
    x = np.geomspace(x_lo, x_hi, n)
    l1, u1, l2, u2 = profile.evaluate(x)
    L = np.log(x)
    low_gap = 2 * x * l1 - u2
    up_gap = 2 * x * u1 - l2
    lg = low_gap * L
    theta_lo = float(np.min(L * (2 * x * l1 / u2 - 1) - 1))
    theta_hi = float(np.max(L * (2 * x * u1 / l2 - 1) - 1))
    bounded = np.max(np.abs(up_gap * L)) < 10 * max(abs(up_gap[0] * L[0]), 1e-300) + 1.0
    if np.all(low_gap > 0) and lg[-1] > growth * lg[0]:
        tag = "transient-many-cutpoints"
    elif np.all(l1 >= 0) and bounded and theta_lo > 1e-9:
        tag = "critical-window"
    elif np.all(up_gap < 0) or theta_hi < -1e-9:
        tag = "recurrent"
    else:
        tag = "unclassified"
    return Classification(tag, float(np.min(low_gap)), float(np.max(up_gap * L)), theta_lo)
