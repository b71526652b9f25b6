"""SplitMix64 pseudo-random numbers.

The generator state is one unsigned 64-bit integer, so every draw is
reproducible across platforms and numpy versions. ``uniforms`` and
``normals`` produce the same sequence as repeated ``prng_next`` calls.
"""

import numpy as np

MASK = 0xFFFFFFFFFFFFFFFF
GAMMA = 0x9E3779B97F4A7C15
_M1 = 0xBF58476D1CE4E5B9
_M2 = 0x94D049BB133111EB


def _mix(z):
    z = ((z ^ (z >> 30)) * _M1) & MASK
    z = ((z ^ (z >> 27)) * _M2) & MASK
    return z ^ (z >> 31)


def prng_next(state):
    """Advance the state; return ``(new_state, 64-bit output)``."""
    state = (state + GAMMA) & MASK
    return state, _mix(state)


def _mix_vec(z):
    with np.errstate(over="ignore"):
        z = (z ^ (z >> np.uint64(30))) * np.uint64(_M1)
        z = (z ^ (z >> np.uint64(27))) * np.uint64(_M2)
    return z ^ (z >> np.uint64(31))


def raw_outputs(state, n):
    """Next ``n`` outputs as a uint64 array, plus the advanced state."""
    steps = np.arange(1, n + 1, dtype=np.uint64)
    with np.errstate(over="ignore"):
        states = np.uint64(state & MASK) + steps * np.uint64(GAMMA)
    return (state + n * GAMMA) & MASK, _mix_vec(states)


def uniforms(state, n):
    """``n`` doubles in [0, 1) built from the top 53 bits of each output."""
    state, z = raw_outputs(state, n)
    return state, (z >> np.uint64(11)).astype(np.float64) * 2.0**-53


def normals(state, n):
    """``n`` standard normals via Box-Muller, one per pair of uniforms."""
    state, u = uniforms(state, 2 * n)
    u1 = 1.0 - u[0::2]  # (0, 1] so the log stays finite
    u2 = u[1::2]
    return state, np.sqrt(-2.0 * np.log(u1)) * np.cos(2.0 * np.pi * u2)


def permutation(state, n):
    """Fisher-Yates shuffle of ``range(n)``."""
    state, u = uniforms(state, max(n - 1, 0))
    perm = np.arange(n)
    for i in range(n - 1, 0, -1):
        j = int(u[n - 1 - i] * (i + 1))
        perm[i], perm[j] = perm[j], perm[i]
    return state, perm
