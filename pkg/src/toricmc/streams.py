"""Deterministic random-number streams for Monte Carlo kernels.

Every stochastic routine draws from an explicit stream keyed by a base seed
and a coordinate tuple.  Keys are hashed with BLAKE2b, so stream assignment
is stable across runs, platforms and worker scheduling.  The in-kernel
generator is xoshiro256++ seeded through splitmix64; its state is a
caller-owned uint64[4] array, which keeps kernels free of global state.
"""

from __future__ import annotations

import hashlib

import numpy as np
from numba import njit

U64 = np.uint64
_MASK = U64(0xFFFFFFFFFFFFFFFF)


def stream_seed(base_seed: int, *coords) -> int:
    """64-bit seed for the stream identified by ``(base_seed, *coords)``.

    Coordinates may be ints, floats or strings; the key is their repr, which
    round-trips exactly for the types used in experiment grids.
    """
    key = repr((int(base_seed),) + tuple(coords)).encode()
    return int.from_bytes(hashlib.blake2b(key, digest_size=8).digest(), "little")


@njit(cache=True)
def _splitmix64(x):
    x = (x + U64(0x9E3779B97F4A7C15)) & _MASK
    z = x
    z = ((z ^ (z >> U64(30))) * U64(0xBF58476D1CE4E5B9)) & _MASK
    z = ((z ^ (z >> U64(27))) * U64(0x94D049BB133111EB)) & _MASK
    return x, z ^ (z >> U64(31))


@njit(cache=True)
def _expand_seed(x):
    state = np.empty(4, dtype=np.uint64)
    for i in range(4):
        x, z = _splitmix64(x)
        state[i] = z
    return state


def init_state(seed: int) -> np.ndarray:
    """Expand a 64-bit seed into an xoshiro256++ state (all-zero excluded).

    Accepts any Python int; only the low 64 bits matter.  The conversion has
    to happen here because jitted entry points reject ints >= 2**63.
    """
    return _expand_seed(U64(int(seed) & 0xFFFFFFFFFFFFFFFF))


@njit(cache=True, inline="always")
def _rotl(x, k):
    return ((x << k) | (x >> (U64(64) - k))) & _MASK


@njit(cache=True, inline="always")
def next_u64(state):
    result = (_rotl((state[0] + state[3]) & _MASK, U64(23)) + state[0]) & _MASK
    t = (state[1] << U64(17)) & _MASK
    state[2] ^= state[0]
    state[3] ^= state[1]
    state[1] ^= state[2]
    state[0] ^= state[3]
    state[2] ^= t
    state[3] = _rotl(state[3], U64(45))
    return result


@njit(cache=True, inline="always")
def uniform(state):
    """Uniform double in [0, 1) with 53 random bits."""
    return (next_u64(state) >> U64(11)) * (1.0 / 9007199254740992.0)


@njit(cache=True, inline="always")
def randbelow(state, n):
    """Uniform integer in [0, n).  Modulo bias is < n/2**64, negligible here.

    Returned as int64 so callers can mix it with signed arithmetic.
    """
    return np.int64(next_u64(state) % U64(n))
