"""Concrete process families with declared moment profiles and regime tags.

Every constructor returns an immutable :class:`~cutwalk.process.ProcessSpec`.
Families are also addressable by config maps through :func:`make_spec`,
e.g. ``{"family": "bd_lamperti", "a": 1.0, "c": 2.0, "x_floor": 2}``.
"""
from __future__ import annotations

import math
import numbers

import numpy as np

from . import _kernels as K
from .process import MomentProfile, ProcessSpec

__all__ = [
    "birth_death_lamperti", "plus_one_minus_two", "ssrw_norm", "ssrw_vector",
    "elliptic_walk", "constant_step", "make_spec", "FAMILIES",
    "BirthDeathSpec", "PlusOneMinusTwoSpec", "SSRWSpec", "EllipticSpec",
    "ConstantStepSpec",
]


def _as_nonneg_int(x0, what="x0"):
    if isinstance(x0, (bool, np.bool_)):
        raise TypeError(f"{what} must be a number")
    try:
        v = float(x0)
    except (TypeError, ValueError) as exc:
        raise TypeError(f"{what} must be a number, got {x0!r}") from exc
    if not math.isfinite(v) or v < 0 or v != math.floor(v):
        raise ValueError(f"{what} must be a nonnegative integer on this lattice, got {x0!r}")
    return int(v)


def _const(v):
    return lambda x: np.full(np.shape(x), float(v))


# ---------------------------------------------------------------------------
# nearest-up chains on Z_+
# ---------------------------------------------------------------------------

class _JumpChainSpec(ProcessSpec):
    """Chain on Z_+ stepping +up w.p. p(x) and -down otherwise; p = 1 below x_floor."""

    kind = K.JUMP
    lattice = True

    def __init__(self, params, profile, p0, a_coef, c_coef, up, down, x_floor):
        super().__init__(params, profile, [p0, a_coef, c_coef, up, down, x_floor])
        self.x_floor = int(x_floor)
        self.up = int(up)
        self.down = int(down)

    def up_probability(self, x):
        """Vectorised p(x)."""
        x = np.asarray(x, dtype=np.float64)
        p0, ac, cc, _, _, xf = self.prm
        out = np.ones_like(x)
        m = x >= xf
        xm = x[m]
        val = p0 + ac / xm
        if cc != 0.0:
            val = val + cc / (xm * np.log(xm))
        out[m] = val
        return out

    def initial_state(self, x0):
        v = _as_nonneg_int(x0)
        return np.array([float(v)]), float(v)

    def transition(self, x):
        v = _as_nonneg_int(x, "x")
        p = float(self.up_probability(np.array([float(v)]))[0])
        if p >= 1.0:
            return np.array([float(v + self.up)]), np.array([1.0])
        return (np.array([float(v + self.up), float(v - self.down)]),
                np.array([p, 1.0 - p]))

    def delta0(self):
        """Closed-form (M) constant: inf over x >= x_floor of P(x -> x+1 in one step).

        Uses that p(x) is monotone in x beyond x_floor, so the infimum is the
        smaller of p(x_floor) and the limit p0.
        """
        pf = float(self.up_probability(np.array([float(self.x_floor)]))[0])
        return min(pf, float(self.prm[0]))


class BirthDeathSpec(_JumpChainSpec):
    family = "bd_lamperti"

    @property
    def a(self):
        return self._params["a"]

    @property
    def c(self):
        return self._params["c"]


class PlusOneMinusTwoSpec(_JumpChainSpec):
    family = "plus_one_minus_two"


def _bd_tag(a, c):
    cc = 0.0 if c is None else c
    if a > 1:
        return "transient-many-cutpoints"
    if a == 1 and cc > 1:
        return "critical-window"
    if a < 1 or (a == 1 and cc < 1):
        return "recurrent"
    return "unclassified"


def birth_death_lamperti(a, c=None, x_floor=2):
    """Nearest-neighbour Lamperti chain on Z_+.

    Up-probability ``p(x) = 1/2 + a/(4x) (+ c/(4x log x))`` for ``x >= x_floor``
    and ``p(x) = 1`` below, so ``mu1 = 2p - 1``, ``mu2 = 1`` and ``B = 1``.

    Parameters
    ----------
    a : float
        Drift coefficient, ``a >= 0``.
    c : float or None
        Second-order (log) coefficient.
    x_floor : int
        Reflection level: ``p = 1`` below it.  At least 1, or 2 when ``c`` is given.

    Returns
    -------
    BirthDeathSpec

    Examples
    --------
    >>> birth_death_lamperti(2.0).regime_tag
    'transient-many-cutpoints'
    >>> birth_death_lamperti(1.0, 2.0).regime_tag
    'critical-window'
    """
    a = float(a)
    if not math.isfinite(a) or a < 0:
        raise ValueError("a must be a finite real >= 0")
    if c is not None:
        c = float(c)
        if not math.isfinite(c):
            raise ValueError("c must be finite")
    min_floor = 1 if c is None else 2  # log x must be positive where the c-term acts
    if isinstance(x_floor, bool) or int(x_floor) != x_floor or x_floor < min_floor:
        raise ValueError(f"x_floor must be an integer >= {min_floor}")
    x_floor = int(x_floor)
    # a/(4x) and c/(4x log x) are monotone on x >= 2, so p is extremal at x_floor
    # (or in the limit 1/2)
    pf = 0.5 + a / (4 * x_floor) + (0.0 if c is None else c / (4 * x_floor * math.log(x_floor)))
    if not 0.0 <= pf <= 1.0:
        raise ValueError(f"p(x_floor) = {pf} lies outside [0, 1]")
    cc = 0.0 if c is None else c / 4

    def p_of(x):
        x = np.asarray(x, dtype=np.float64)
        out = np.ones_like(x)
        m = x >= x_floor
        xm = x[m]
        v = 0.5 + a / (4 * xm)
        if cc:
            v = v + cc / (xm * np.log(xm))
        out[m] = v
        return out

    def mu1(x):
        return 2 * p_of(x) - 1

    prof = MomentProfile(mu1, mu1, _const(1.0), _const(1.0), 1.0, _bd_tag(a, c))
    return BirthDeathSpec({"a": a, "c": c, "x_floor": x_floor}, prof,
                          0.5, a / 4, cc, 1, 1, x_floor)


def plus_one_minus_two(a, x_floor=2):
    """Chain on Z_+ stepping +1 w.p. ``p(x) = 2/3 + a/(6x)`` and -2 otherwise.

    Below ``x_floor`` (at least {0, 1}) the step is +1.  Declared moments:
    ``mu1 = a/(2x)``, ``mu2 = 2 - a/(2x)``, ``B = 2``.
    """
    a = float(a)
    if not math.isfinite(a):
        raise ValueError("a must be finite")
    if isinstance(x_floor, bool) or int(x_floor) != x_floor or x_floor < 2:
        raise ValueError("x_floor must be an integer >= 2 (a -2 step from 1 would leave Z_+)")
    x_floor = int(x_floor)
    pf = 2.0 / 3.0 + a / (6 * x_floor)
    if not 0.0 <= pf <= 1.0:
        raise ValueError(f"p(x_floor) = {pf} lies outside [0, 1]")

    def p_of(x):
        x = np.asarray(x, dtype=np.float64)
        out = np.ones_like(x)
        m = x >= x_floor
        out[m] = 2.0 / 3.0 + a / (6 * x[m])
        return out

    def mu1(x):
        return 3 * p_of(x) - 2

    def mu2(x):
        return 4 - 3 * p_of(x)

    if a > 2:
        tag = "transient-many-cutpoints"
    else:
        # a == 2: 2x mu1 / mu2 = 1 + O(1/x), below the 1 + 1/log x threshold
        tag = "recurrent"
    prof = MomentProfile(mu1, mu1, mu2, mu2, 2.0, tag)
    return PlusOneMinusTwoSpec({"a": a, "x_floor": x_floor}, prof,
                               2.0 / 3.0, a / 6, 0.0, 1, 2, x_floor)


# ---------------------------------------------------------------------------
# simple symmetric random walk on Z^d
# ---------------------------------------------------------------------------

#: slack constants of the declared SSRW-norm bands, valid for |x| >= 2
SSRW_MU1_SLACK = 0.25
SSRW_MU2_SLACK = 0.25


def _ssrw_profile(d):
    d = int(d)
    lim1 = (d - 1) / (2.0 * d)
    lim2 = 1.0 / d

    def band(x, centre, slack, lo_small, hi_small, sign):
        x = np.asarray(x, dtype=np.float64)
        out = np.full(x.shape, hi_small if sign > 0 else lo_small, dtype=np.float64)
        m = x >= 2
        out[m] = centre(x[m]) + sign * slack(x[m])
        return out

    def m1l(x):
        return band(x, lambda t: lim1 / t, lambda t: SSRW_MU1_SLACK / t ** 2, -1.0, 1.0, -1)

    def m1u(x):
        return band(x, lambda t: lim1 / t, lambda t: SSRW_MU1_SLACK / t ** 2, -1.0, 1.0, +1)

    def m2l(x):
        return np.maximum(band(x, lambda t: lim2 + 0 * t, lambda t: SSRW_MU2_SLACK / t,
                               0.0, 1.0, -1), 0.0)

    def m2u(x):
        return np.minimum(band(x, lambda t: lim2 + 0 * t, lambda t: SSRW_MU2_SLACK / t,
                               0.0, 1.0, +1), 1.0)

    if d == 1:
        # |S_n| is exactly a reflected symmetric walk away from 0
        def m1l(x):  # noqa: F811
            x = np.asarray(x, dtype=np.float64)
            return np.where(x < 1, 1.0, 0.0)
        m1u = m1l
        m2l = m2u = _const(1.0)
    tag = "transient-many-cutpoints" if d >= 3 else "recurrent"
    return MomentProfile(m1l, m1u, m2l, m2u, 1.0, tag)


class SSRWSpec(ProcessSpec):
    """SSRW on Z^d; scalar form emits ``||S_n||``, vector form emits ``S_n``."""

    kind = K.SSRW
    lattice = True

    def __init__(self, d, vector):
        self.d = int(d)
        self.vector = bool(vector)
        self.dimension = self.d if vector else 1
        self.family = "ssrw_vector" if vector else "ssrw_norm"
        super().__init__({"d": self.d}, _ssrw_profile(self.d), [float(self.d)])

    def initial_state(self, x0):
        d = self.d
        arr = np.atleast_1d(np.asarray(x0, dtype=np.float64))
        if arr.size == 1:
            v = _as_nonneg_int(arr[0])
            s = np.zeros(d)
            s[0] = v
        elif self.vector and arr.size == d:
            if np.any(arr != np.round(arr)) or not np.all(np.isfinite(arr)):
                raise ValueError("SSRW start must be a lattice point")
            s = arr.astype(np.float64)
        else:
            raise ValueError(f"start point must be a scalar radius or a {d}-vector")
        sq = float(np.dot(s, s))
        return np.concatenate([s, [sq]]), math.sqrt(sq)

    def transition(self, x):
        """Norm kernel from the representative lattice point ``x e_1``."""
        if self.vector:
            raise TypeError("vector spec has no scalar kernel")
        v = _as_nonneg_int(x, "x")
        d = self.d
        if v == 0:
            return np.array([1.0]), np.array([1.0])
        ys = [v + 1.0, v - 1.0] + [math.sqrt(v * v + 1.0)] * (2 * (d - 1))
        return np.array(ys), np.full(2 * d, 1.0 / (2 * d))


def ssrw_norm(d):
    """Norm of simple symmetric random walk on Z^d started at ``x0 e_1``.

    Declared bands: ``mu1 = (d-1)/(2dx) +/- 0.25/x^2`` and
    ``mu2 = 1/d +/- 0.25/x`` for ``x >= 2`` (trivial bounds below), ``B = 1``.
    """
    if isinstance(d, bool) or not isinstance(d, numbers.Integral) or d < 1:
        raise ValueError("d must be an integer >= 1")
    return SSRWSpec(d, vector=False)


def ssrw_vector(d):
    """Simple symmetric random walk on Z^d as a vector process (``d >= 2``)."""
    if isinstance(d, bool) or not isinstance(d, numbers.Integral) or d < 2:
        raise ValueError("d must be an integer >= 2")
    return SSRWSpec(d, vector=True)


# ---------------------------------------------------------------------------
# elliptic walk on R^d
# ---------------------------------------------------------------------------

class EllipticSpec(ProcessSpec):
    """Zero-drift walk with radial variance U and total variance V (exact)."""

    kind = K.ELLIPTIC
    family = "elliptic"
    vector = True

    def __init__(self, d, rho, sigma):
        self.d = int(d)
        self.dimension = self.d
        self.rho = float(rho)
        self.sigma = float(sigma)
        rho, sigma = self.rho, self.sigma
        self.U = rho ** 2 / 2
        self.V = (rho ** 2 + sigma ** 2) / 2

        # the norm of this walk is itself Markov: from radius r > 0 a radial
        # step moves to |r +/- rho|, a tangential one to sqrt(r^2 + sigma^2)
        def mu1(x):
            r = np.asarray(x, dtype=np.float64)
            tang = np.sqrt(r * r + sigma ** 2) - r
            rad = 0.5 * ((r + rho) + np.abs(r - rho)) - r
            return np.where(r == 0, rho, 0.5 * rad + 0.5 * tang)

        def mu2(x):
            r = np.asarray(x, dtype=np.float64)
            tang = (np.sqrt(r * r + sigma ** 2) - r) ** 2
            rad = 0.5 * (rho ** 2 + (np.abs(r - rho) - r) ** 2)
            return np.where(r == 0, rho ** 2, 0.5 * rad + 0.5 * tang)

        if sigma ** 2 > rho ** 2:
            tag = "transient-many-cutpoints"
        elif sigma ** 2 < rho ** 2:
            tag = "recurrent"
        else:
            tag = "unclassified"
        prof = MomentProfile(mu1, mu1, mu2, mu2, max(rho, sigma), tag)
        super().__init__({"d": self.d, "rho": rho, "sigma": sigma}, prof, [rho, sigma])

    def initial_state(self, x0):
        arr = np.atleast_1d(np.asarray(x0, dtype=np.float64))
        if not np.all(np.isfinite(arr)):
            raise ValueError("start point must be finite")
        if arr.size == 1:
            if arr[0] < 0:
                raise ValueError("a scalar start is a radius and must be >= 0")
            s = np.zeros(self.d)
            s[0] = arr[0]
        elif arr.size == self.d:
            s = arr.copy()
        else:
            raise ValueError(f"start point must be a radius or a {self.d}-vector")
        return s, float(np.linalg.norm(s))

    def tangent_basis(self, x):
        """The fixed orthonormal basis of the complement of ``x`` used by the sampler."""
        x = np.asarray(x, dtype=np.float64)
        r = float(np.linalg.norm(x))
        if r == 0:
            raise ValueError("no tangent space at the origin")
        out = np.empty((self.d - 1, self.d))
        work = np.empty(self.d)
        for j in range(self.d - 1):
            K._tangent(x, self.d, r, j, work)
            out[j] = work
        return out


def elliptic_walk(d, rho, sigma):
    """Elliptic random walk on R^d (``d >= 2``).

    From ``x != 0``: with probability 1/2 a radial step ``+/- rho x/|x|``,
    otherwise a tangential step ``+/- sigma t`` with ``t`` uniform over a fixed
    Gram-Schmidt basis of the orthogonal complement of ``x``.  From 0: ``+/- rho e_1``.
    Hence ``U = rho^2/2``, ``V = (rho^2 + sigma^2)/2`` exactly and ``B = max(rho, sigma)``.
    """
    if isinstance(d, bool) or not isinstance(d, numbers.Integral) or d < 2:
        raise ValueError("d must be an integer >= 2")
    if not (float(rho) > 0 and float(sigma) > 0):
        raise ValueError("rho and sigma must be positive")
    return EllipticSpec(d, rho, sigma)


# ---------------------------------------------------------------------------
# deterministic step (testing aid)
# ---------------------------------------------------------------------------

class ConstantStepSpec(ProcessSpec):
    kind = K.CONST
    family = "constant_step"

    def __init__(self, delta):
        delta = float(delta)
        self.delta = delta

        def mu1(x):
            x = np.asarray(x, dtype=np.float64)
            return np.maximum(x + delta, 0.0) - x

        def mu2(x):
            return mu1(x) ** 2

        if delta > 0:
            tag = "transient-many-cutpoints"
        elif delta < 0:
            tag = "recurrent"
        else:
            tag = "unclassified"
        B = abs(delta) if delta != 0 else 1.0
        super().__init__({"delta": delta}, MomentProfile(mu1, mu1, mu2, mu2, B, tag), [delta])

    def initial_state(self, x0):
        v = float(x0)
        if not math.isfinite(v) or v < 0:
            raise ValueError("x0 must be a finite real >= 0")
        return np.array([v]), v

    def transition(self, x):
        x = float(x)
        return np.array([max(x + self.delta, 0.0)]), np.array([1.0])


def constant_step(delta=1.0):
    """Deterministic spec ``x -> max(x + delta, 0)`` (the "always +1" test process)."""
    if not math.isfinite(float(delta)):
        raise ValueError("delta must be finite")
    return ConstantStepSpec(delta)


# ---------------------------------------------------------------------------
# registry
# ---------------------------------------------------------------------------

FAMILIES = {
    "bd_lamperti": birth_death_lamperti,
    "plus_one_minus_two": plus_one_minus_two,
    "ssrw_norm": ssrw_norm,
    "ssrw_vector": ssrw_vector,
    "elliptic": elliptic_walk,
    "constant_step": constant_step,
}


def make_spec(config):
    """Build a spec from a config map such as ``{"family": "bd_lamperti", "a": 2}``."""
    if isinstance(config, ProcessSpec):
        return config
    if not isinstance(config, dict) or "family" not in config:
        raise ValueError("generator config must be a mapping with a 'family' key")
    cfg = dict(config)
    fam = cfg.pop("family")
    if fam not in FAMILIES:
        raise ValueError(f"unknown family {fam!r}; choose from {sorted(FAMILIES)}")
    if fam in ("ssrw_norm", "ssrw_vector", "elliptic") and "d" in cfg:
        d = cfg["d"]
        if isinstance(d, float) and d.is_integer():
            cfg["d"] = int(d)
    try:
        return FAMILIES[fam](**cfg)
    except TypeError as exc:
        raise ValueError(f"bad parameters for {fam}: {exc}") from exc
