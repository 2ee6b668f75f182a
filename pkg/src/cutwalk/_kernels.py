"""Compiled step samplers shared by simulation and Monte Carlo races.

A process is described to the kernels by an integer family code, a float
parameter vector and a mutable float state vector.  The scalar position of
a state (the value the analysis sees) is returned by :func:`_step` after each
move, so vector processes can be raced on their norm.

Family codes and parameter layouts
----------------------------------
JUMP (0)      nearest-up / fixed-down chain on Z_+;
              prm = [p0, a_coef, c_coef, up, down, x_floor];
              p(x) = p0 + a_coef/x + c_coef/(x log x) for x >= x_floor, else 1.
CONST (1)     x -> max(x + prm[0], 0).
SSRW (2)      simple symmetric walk on Z^d; state = (s_1..s_d, |s|^2).
ELLIPTIC (3)  prm = [rho, sigma]; state = (xi_1..xi_d).
"""
import math

import numpy as np
from numba import njit

from ._rng import randbelow, seed_stream, uniform

JUMP = 0
CONST = 1
SSRW = 2
ELLIPTIC = 3

RETURNED = 0
ESCAPED = 1
TRUNCATED = 2


@njit(cache=True, inline="always")
def _jump_up_prob(x, prm):
    if x < prm[5]:
        return 1.0
    p = prm[0] + prm[1] / x
    if prm[2] != 0.0:
        p += prm[2] / (x * math.log(x))
    return p


@njit(cache=True)
def _tangent(state, d, r, j, out):
    """j-th vector of the Gram-Schmidt basis of the complement of state/r.

    The pivot coordinate (largest |x_i|, lowest index on ties) is dropped
    and the remaining unit vectors are orthonormalised in index order.
    """
    piv = 0
    best = -1.0
    for i in range(d):
        a = abs(state[i])
        if a > best:
            best = a
            piv = i
    basis = np.empty((d, d))
    for i in range(d):
        basis[0, i] = state[i] / r
    m = 1
    for c in range(d):
        if c == piv:
            continue
        for i in range(d):
            out[i] = 0.0
        out[c] = 1.0
        for b in range(m):
            dot = 0.0
            for i in range(d):
                dot += out[i] * basis[b, i]
            for i in range(d):
                out[i] -= dot * basis[b, i]
        nrm = 0.0
        for i in range(d):
            nrm += out[i] * out[i]
        nrm = math.sqrt(nrm)
        for i in range(d):
            basis[m, i] = out[i] / nrm
        if m - 1 == j:
            for i in range(d):
                out[i] = basis[m, i]
            return
        m += 1


@njit(cache=True)
def _step(kind, prm, state, rng, work):
    """Advance ``state`` by one step and return the new scalar position."""
    if kind == JUMP:
        x = state[0]
        if uniform(rng) < _jump_up_prob(x, prm):
            x = x + prm[3]
        else:
            x = x - prm[4]
        state[0] = x
        return x
    elif kind == CONST:
        x = state[0] + prm[0]
        if x < 0.0:
            x = 0.0
        state[0] = x
        return x
    elif kind == SSRW:
        d = state.shape[0] - 1
        k = randbelow(rng, 2 * d)
        i = k >> 1
        if k & 1:
            state[d] += 1.0 - 2.0 * state[i]
            state[i] -= 1.0
        else:
            state[d] += 1.0 + 2.0 * state[i]
            state[i] += 1.0
        return math.sqrt(state[d])
    else:
        d = state.shape[0]
        rho = prm[0]
        sigma = prm[1]
        r2 = 0.0
        for i in range(d):
            r2 += state[i] * state[i]
        r = math.sqrt(r2)
        branch = uniform(rng)
        sgn = 1.0 if uniform(rng) < 0.5 else -1.0
        if r == 0.0:
            state[0] += sgn * rho
        elif branch < 0.5:
            for i in range(d):
                state[i] += sgn * rho * state[i] / r
        else:
            j = randbelow(rng, d - 1)
            _tangent(state, d, r, j, work)
            for i in range(d):
                state[i] += sgn * sigma * work[i]
        r2 = 0.0
        for i in range(d):
            r2 += state[i] * state[i]
        return math.sqrt(r2)


@njit(cache=True)
def simulate_path(kind, prm, state0, pos0, n_steps, keys, replica, vec_out):
    """Simulate one replica; returns positions, fills ``vec_out`` rows if it has any."""
    rng = np.empty(4, np.uint64)
    seed_stream(rng, keys, replica)
    state = state0.copy()
    work = np.empty(max(state.shape[0], 1))
    pos = np.empty(n_steps + 1)
    pos[0] = pos0
    record = vec_out.shape[0] > 0
    dv = vec_out.shape[1]
    if record:
        for i in range(dv):
            vec_out[0, i] = state[i]
    for n in range(n_steps):
        pos[n + 1] = _step(kind, prm, state, rng, work)
        if record:
            for i in range(dv):
                vec_out[n + 1, i] = state[i]
    return pos


@njit(cache=True)
def race_batch(kind, prm, state0, pos0, lo, hi, keys, first_replica, n_rep,
               max_steps):
    """Race each replica from ``state0`` until position <= lo or >= hi.

    Returns outcome codes (RETURNED / ESCAPED / TRUNCATED), the position at
    the stopping time, and the step counts.
    """
    outcome = np.empty(n_rep, np.int8)
    landing = np.empty(n_rep)
    steps = np.empty(n_rep, np.int64)
    rng = np.empty(4, np.uint64)
    state = state0.copy()
    work = np.empty(max(state.shape[0], 1))
    for r in range(n_rep):
        seed_stream(rng, keys, first_replica + r)
        for i in range(state.shape[0]):
            state[i] = state0[i]
        x = pos0
        res = TRUNCATED
        m = 0
        while m <= max_steps:
            if x <= lo:
                res = RETURNED
                break
            if x >= hi:
                res = ESCAPED
                break
            if m == max_steps:
                break
            x = _step(kind, prm, state, rng, work)
            m += 1
        outcome[r] = res
        landing[r] = x
        steps[r] = m
    return outcome, landing, steps


@njit(cache=True)
def sample_increments(kind, prm, state0, pos0, n, keys, replica):
    """``n`` independent one-step increments of the scalar position from ``state0``."""
    rng = np.empty(4, np.uint64)
    seed_stream(rng, keys, replica)
    state = state0.copy()
    work = np.empty(max(state.shape[0], 1))
    out = np.empty(n)
    for k in range(n):
        for i in range(state.shape[0]):
            state[i] = state0[i]
        out[k] = _step(kind, prm, state, rng, work) - pos0
    return out


@njit(cache=True)
def sample_vector_increments(kind, prm, state0, dvec, n, keys, replica):
    """``n`` independent one-step increments of the first ``dvec`` state coordinates."""
    rng = np.empty(4, np.uint64)
    seed_stream(rng, keys, replica)
    state = state0.copy()
    work = np.empty(state.shape[0])
    out = np.empty((n, dvec))
    for k in range(n):
        for i in range(state.shape[0]):
            state[i] = state0[i]
        _step(kind, prm, state, rng, work)
        for i in range(dvec):
            out[k, i] = state[i] - state0[i]
    return out
