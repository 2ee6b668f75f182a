"""Scale function and exact level-skeleton sampler for nearest-neighbour chains.

For a birth-death chain with up-probabilities ``p_i`` and ``rho_i = q_i/p_i``
put ``e_k = prod_{i=b+1}^{k} rho_i`` (``e_b = 1``) and ``t(k) = sum_{j>=k} e_j``.
Gambler's ruin gives, for ``v < m``, the probability of reaching ``m + 1``
before ``v`` from ``m`` and the probability ``1 - t(s)/t(v)`` of never
hitting ``v`` from ``s > v``.

The level skeleton of a path started at ``s0`` is the sequence ``L_m`` of the
lowest levels visited while the running maximum equals ``m``
(``m = s0, s0+1, ...``) together with the minimum ``G`` of the whole future
after the first passage to ``T + 1``.  By the strong Markov property at the
successive maxima these are independent, with explicit laws, so cutpoints of
the infinite path below ``T`` can be sampled exactly without stepping:

* ``v`` (``>= s0``) is a cutpoint iff ``min(min_{v<m<=T} L_m, G) > v``;
* the unit edge ``(v, v+1)`` lies in the separating set iff ``v`` is a
  cutpoint or (``v < s0`` and the global minimum exceeds ``v``).
"""
from __future__ import annotations

import math

import numpy as np
from numba import njit
from scipy import integrate

from ._rng import seed_stream, stream_keys, uniform


def _nn_chain(spec):
    from .generators import _JumpChainSpec

    if not isinstance(spec, _JumpChainSpec) or spec.up != 1 or spec.down != 1:
        raise TypeError("needs a nearest-neighbour birth-death spec")
    return spec


class BDScale:
    """Scale-function tables of a nearest-neighbour chain on levels ``[base, K]``.

    Parameters
    ----------
    spec : BirthDeathSpec
    base : int
        Normalisation level ``b`` (``e_b = 1``); ``p_i`` must lie in (0, 1) for
        ``i > b``, i.e. ``base >= x_floor - 1``.
    top : int
        Largest level that will be queried; tables extend to ``K = 4 top``
        and the tail beyond ``K`` is integrated analytically.

    Attributes
    ----------
    e, t : ndarray
        ``e[k - base]`` and ``t[k - base]`` for ``k`` in ``[base, K + 1]``.
    transient : bool
        Whether ``t(base)`` is finite.
    """

    def __init__(self, spec, base, top):
        spec = _nn_chain(spec)
        base = int(base)
        top = int(top)
        if base < spec.x_floor - 1:
            raise ValueError(f"base must be >= x_floor - 1 = {spec.x_floor - 1}")
        if top <= base:
            raise ValueError("top must exceed base")
        K = max(4 * top, base + 1024)
        lv = np.arange(base, K + 2, dtype=np.float64)
        p = spec.up_probability(lv)
        if np.any(p[1:] <= 0) or np.any(p[1:] >= 1):
            raise ValueError("p must lie strictly inside (0, 1) above the base level")
        logrho = np.log1p(-p[1:]) - np.log(p[1:])
        loge = np.concatenate([[0.0], np.cumsum(logrho)])
        e = np.exp(loge)
        self.spec = spec
        self.base = base
        self.top = top
        self.K = K
        self.p = p
        self.e = e
        a = 4.0 * spec.prm[1]  # 4 * (a/4)
        c = 0.0
        if spec.prm[2] != 0.0:
            c = 4.0 * spec.prm[2]
        self.tail = self._tail(e[-1], float(K + 1), a, c)
        self.transient = math.isfinite(self.tail)
        if self.transient:
            t = np.cumsum(e[::-1])[::-1] + self.tail
        else:
            t = np.full(e.shape, np.inf)
        self.t = t

    @staticmethod
    def _tail(eK, K, a, c):
        """``sum_{j > K} e_j`` from ``e_j ~ e_K (K/j)^a (log K/log j)^c``.

        Euler-Maclaurin: integral from K minus ``f(K)/2`` minus ``f'(K)/12``.
        """
        L = math.log(K)
        if a < 1 or (a == 1 and c <= 1):
            return math.inf

        def g(s):
            return math.exp((1.0 - a) * s) * (L / (L + s)) ** c

        val, _ = integrate.quad(g, 0.0, np.inf, limit=200)
        fprime = -eK * (a + c / L) / K
        return eK * K * val - eK / 2.0 - fprime / 12.0

    def index(self, k):
        return int(k) - self.base

    def never_hit(self, start, v):
        """``P_start(never hit v)`` for ``base <= v < start <= K``."""
        if not self.transient:
            return 0.0
        i, j = self.index(v), self.index(start)
        return float((self.t[i] - self.t[j]) / self.t[i])

    def race(self, start, v, w):
        """``P_start(hit w before v)`` for ``base <= v < start <= w <= K + 1``."""
        i, s, j = self.index(v), self.index(start), self.index(w)
        # sum_{k=v}^{start-1} e_k / sum_{k=v}^{w-1} e_k via the finite parts
        cs = np.cumsum(self.e[i:j])
        return float(cs[s - i - 1] / cs[-1])


# ---------------------------------------------------------------------------
# compiled sampler
# ---------------------------------------------------------------------------

@njit(cache=True)
def _p_above(p, e, t, base, m, v):
    """P(L_m > v) for base <= v < m (indices are levels)."""
    pm = p[m - base]
    qm = 1.0 - pm
    d = t[v - base] - t[m - base]
    return pm / (pm + qm * e[m - 1 - base] / d)


@njit(cache=True)
def _reaches(p, e, t, base, m, v, u):
    """Is P(L_m >= v) >= u?  (monotone: true for low v, false for v = m when u > p_m)"""
    if v == base:
        return True
    return _p_above(p, e, t, base, m, v - 1) >= u


@njit(cache=True)
def _sample_low(p, e, t, base, m, u):
    """Inverse-CDF draw of L_m: the largest v with P(L_m >= v) >= u."""
    if u <= p[m - base]:
        return m
    # gallop down from m (known to fail) until a level passes, then bisect
    hi = m
    step = 1
    while True:
        cand = hi - step
        if cand < base:
            cand = base
        if _reaches(p, e, t, base, m, cand, u):
            break
        hi = cand
        step *= 2
    a = cand
    b = hi - 1
    while a < b:
        mid = (a + b + 1) // 2
        if _reaches(p, e, t, base, m, mid, u):
            a = mid
        else:
            b = mid - 1
    return a


@njit(cache=True)
def _sample_final_min(t, base, top, u, transient):
    """Minimum of the path after first reaching ``top + 1``."""
    if not transient:
        return base
    tt = t[top + 1 - base]
    # P(G >= v) = 1 - t(top+1)/t(v-1) for v > base; equals 1 at v = base
    a = base
    b = top + 1
    while a < b:
        mid = (a + b + 1) // 2
        ok = 1.0 - tt / t[mid - 1 - base] >= u
        if ok:
            a = mid
        else:
            b = mid - 1
    return a


@njit(cache=True)
def _ladder_replica(p, e, t, base, transient, s0, top, rng, low):
    """Fill ``low[m - s0]`` for m in [s0, top]; return the final minimum G."""
    for m in range(s0, top + 1):
        low[m - s0] = _sample_low(p, e, t, base, m, uniform(rng))
    return _sample_final_min(t, base, top, uniform(rng), transient)


@njit(cache=True)
def _cut_levels(low, g, s0, top, cut, strong):
    """Cutpoint / strong flags for levels v in [s0, top]."""
    run = g
    for v in range(top, s0 - 1, -1):
        # run = min over m in (v, top] of L_m, and G
        cut[v - s0] = run > v
        strong[v - s0] = cut[v - s0] and low[v - s0] == v
        if low[v - s0] < run:
            run = low[v - s0]
    return run  # global minimum over the skeleton from s0


@njit(cache=True)
def _ladder_cuts(p, e, t, base, transient, s0, top, rng, cut):
    """Cutpoint flags for levels s0..top, sampling the skeleton from the top down.

    Only whether ``L_m`` falls below the running minimum of the higher epochs
    matters, which costs one probability evaluation; the exact value is drawn
    (by inverse CDF with the same uniform) only when it does.  Returns the
    global minimum.
    """
    run = _sample_final_min(t, base, top, uniform(rng), transient)
    for m in range(top, s0 - 1, -1):
        cut[m - s0] = run > m
        u = uniform(rng)
        if u <= p[m - base]:
            low = m
        elif run <= m and _reaches(p, e, t, base, m, run, u):
            continue  # L_m >= run
        else:
            low = _sample_low(p, e, t, base, m, u)
        if low < run:
            run = low
    return run


@njit(cache=True)
def _block_stats(p, e, t, base, transient, s0, top, keys, first_rep, n_rep, j_lo, j_hi,
                 hit, mx, ncut):
    cut = np.empty(top - s0 + 1, np.bool_)
    rng = np.empty(4, np.uint64)
    for r in range(n_rep):
        seed_stream(rng, keys, first_rep + r)
        gmin = _ladder_cuts(p, e, t, base, transient, s0, top, rng, cut)
        for jj in range(j_lo, j_hi + 1):
            x = 1 << jj
            c = 0
            for v in range(x, 2 * x + 1):
                if v >= s0 and v <= top and cut[v - s0]:
                    c += 1
            ncut[r, jj - j_lo] = c
            hit[r, jj - j_lo] = c >= 1
            m = 0
            for v in range(x // 2, 2 * x):
                if v >= s0:
                    if v <= top and cut[v - s0]:
                        m += 1
                elif gmin > v:
                    m += 1
            mx[r, jj - j_lo] = m


class LadderSampler:
    """Exact sampler of cut structure below a level ``top`` for the infinite path.

    Parameters
    ----------
    spec : BirthDeathSpec
    top : int
        Highest level whose cutpoint status is sampled.
    start : int, optional
        Start level ``s0`` (default ``x_floor``).  Levels below it are never
        cutpoints.
    first_level : int, optional
        Lowest level of interest; epochs below ``max(start, first_level)``
        do not influence cutpoints above it and are skipped.
    """

    def __init__(self, spec, top, start=None, first_level=None):
        spec = _nn_chain(spec)
        self.spec = spec
        self.top = int(top)
        self.start = spec.x_floor if start is None else int(start)
        if self.start < spec.x_floor - 1:
            raise ValueError("start must be >= x_floor - 1")
        self.s0 = max(self.start, 0 if first_level is None else int(first_level))
        if self.s0 > self.top:
            raise ValueError("top must be >= the first sampled level")
        self.scale = BDScale(spec, spec.x_floor - 1, self.top + 1)

    def _arrays(self):
        sc = self.scale
        return sc.p, sc.e, sc.t, sc.base, sc.transient

    def sample(self, seed, replica=0):
        """One replica: ``(levels, low, final_min, cut, strong)`` for levels ``s0..top``."""
        p, e, t, base, tr = self._arrays()
        rng = np.empty(4, np.uint64)
        seed_stream(rng, stream_keys(seed), int(replica))
        n = self.top - self.s0 + 1
        low = np.empty(n, np.int64)
        g = _ladder_replica(p, e, t, base, tr, self.s0, self.top, rng, low)
        cut = np.empty(n, np.bool_)
        strong = np.empty(n, np.bool_)
        _cut_levels(low, g, self.s0, self.top, cut, strong)
        levels = np.arange(self.s0, self.top + 1)
        if self.s0 > self.start:
            # epochs below s0 were skipped, so strong flags at s0 are not meaningful
            strong[0] = False
        return levels, low, int(g), cut, strong

    def block_stats(self, seed, replicas, j_lo, j_hi, first_replica=0):
        """Per-replica ``1{E_x}``, ``M_x`` and ``#(C cap [x, 2x])`` for ``x = 2^j``.

        Requires ``2^(j_hi + 1) <= top`` and ``2^(j_lo - 1) >= s0`` (or the start).

        Returns
        -------
        hit, mx, ncut : ndarray of shape (replicas, j_hi - j_lo + 1)
        """
        if 2 ** (j_hi + 1) > self.top:
            raise ValueError("top must reach 2^(j_hi+1)")
        if 2 ** (j_lo - 1) < self.s0 and self.s0 > self.start:
            raise ValueError("first_level above x/2 for the lowest block")
        p, e, t, base, tr = self._arrays()
        nb = j_hi - j_lo + 1
        hit = np.zeros((replicas, nb), np.bool_)
        mx = np.zeros((replicas, nb), np.int64)
        ncut = np.zeros((replicas, nb), np.int64)
        _block_stats(p, e, t, base, tr, self.s0, self.top, stream_keys(seed),
                     int(first_replica), int(replicas), int(j_lo), int(j_hi), hit, mx, ncut)
        return hit, mx, ncut

    def cut_probability(self, v):
        """Exact ``P(v in C) = P_{v+1}(never hit v)`` for ``v >= start``."""
        if v < self.start:
            return 0.0
        return self.scale.never_hit(v + 1, v)
