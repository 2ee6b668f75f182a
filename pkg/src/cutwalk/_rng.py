"""Reproducible per-replica random streams usable inside numba kernels.

Every replica ``r`` of a run seeded with ``seed`` draws from its own
xoshiro256** stream whose 256-bit state is a pure function of
``(seed, r)``.  The 64-bit keys are produced by :class:`numpy.random.SeedSequence`
so that nearby user seeds give unrelated streams; the per-replica expansion
happens inside the kernels (SplitMix64 mixing of ``key ^ mix(r)``), so a batch
of a million replicas needs no Python-level object per replica.
"""
import numpy as np
from numba import njit

_U64 = np.uint64
_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_M1 = np.uint64(0xBF58476D1CE4E5B9)
_M2 = np.uint64(0x94D049BB133111EB)
_INV53 = 1.0 / 9007199254740992.0

SEED_MAX = 2**64 - 1


def check_seed(seed):
    """Validate a user seed (an integer in ``[0, 2**64)``) and return it as int."""
    if isinstance(seed, (bool, np.bool_)):
        raise TypeError("seed must be an integer, not bool")
    try:
        s = int(seed)
    except (TypeError, ValueError) as exc:
        raise TypeError(f"seed must be an integer, got {seed!r}") from exc
    if s != seed or s < 0 or s > SEED_MAX:
        raise ValueError(f"seed must be an integer in [0, 2**64), got {seed!r}")
    return s


def stream_keys(seed):
    """Return the two 64-bit keys that parametrise all replica streams of ``seed``."""
    s = check_seed(seed)
    words = np.random.SeedSequence(s).generate_state(2, dtype=np.uint64)
    return words.astype(np.uint64)


def host_generator(seed, replica=0):
    """A numpy Generator for host-side (non-kernel) sampling of replica ``replica``."""
    s = check_seed(seed)
    return np.random.default_rng(np.random.SeedSequence(s, spawn_key=(int(replica),)))


@njit(cache=True, inline="always")
def _rotl(x, k):
    return (x << _U64(k)) | (x >> _U64(64 - k))


@njit(cache=True, inline="always")
def _mix64(z):
    z = (z ^ (z >> _U64(30))) * _M1
    z = (z ^ (z >> _U64(27))) * _M2
    return z ^ (z >> _U64(31))


@njit(cache=True)
def seed_stream(state, keys, replica):
    """Fill the 4-word xoshiro state for ``replica`` from the run ``keys``."""
    z = keys[0] ^ _mix64(_U64(replica) * _GOLDEN + keys[1])
    for i in range(4):
        z = z + _GOLDEN
        state[i] = _mix64(z)
    # the all-zero state is absorbing; it cannot arise from SplitMix64 output
    # in practice but guard anyway
    if state[0] == 0 and state[1] == 0 and state[2] == 0 and state[3] == 0:
        state[0] = _GOLDEN


@njit(cache=True, inline="always")
def next_u64(state):
    result = _rotl(state[1] * _U64(5), 7) * _U64(9)
    t = state[1] << _U64(17)
    state[2] ^= state[0]
    state[3] ^= state[1]
    state[1] ^= state[2]
    state[0] ^= state[3]
    state[2] ^= t
    state[3] = _rotl(state[3], 45)
    return result


@njit(cache=True, inline="always")
def uniform(state):
    """A double in [0, 1) built from the top 53 bits."""
    return (next_u64(state) >> _U64(11)) * _INV53


@njit(cache=True, inline="always")
def randbelow(state, n):
    """An integer uniform on {0, ..., n-1} (n small; multiply-shift is unbiased to 2^-53)."""
    return int(uniform(state) * n)


@njit(cache=True)
def _draw_uniforms(keys, replica, n):
    st = np.empty(4, np.uint64)
    seed_stream(st, keys, replica)
    out = np.empty(n)
    for i in range(n):
        out[i] = uniform(st)
    return out


@njit(cache=True)
def _draw_u64(keys, replica, n):
    st = np.empty(4, np.uint64)
    seed_stream(st, keys, replica)
    out = np.empty(n, np.uint64)
    for i in range(n):
        out[i] = next_u64(st)
    return out


def replica_uniforms(seed, replica, n):
    """First ``n`` uniforms of replica ``replica``'s stream (for inspection and tests)."""
    return _draw_uniforms(stream_keys(seed), int(replica), int(n))
