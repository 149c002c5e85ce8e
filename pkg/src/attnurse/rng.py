"""Portable xoshiro256** generator with a Box-Muller Gaussian transform.

Streams are fully determined by the integer seed: the 256-bit state is
filled from four consecutive splitmix64 outputs.  Uniforms take the top
53 bits; Gaussians come in Box-Muller pairs, and an odd request leaves the
second value of the last pair cached for the next call.
"""
from __future__ import annotations

import numba
import numpy as np

_MASK = (1 << 64) - 1
_TWO_PI = 6.283185307179586
_INV_2_53 = 1.0 / 9007199254740992.0


def splitmix64(x: int) -> tuple[int, int]:
    """Advance a splitmix64 state; returns (new_state, output)."""
    x = (x + 0x9E3779B97F4A7C15) & _MASK
    z = x
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK
    return x, z ^ (z >> 31)


def seed_state(seed: int) -> np.ndarray:
    s = seed & _MASK
    out = []
    for _ in range(4):
        s, v = splitmix64(s)
        out.append(v)
    return np.array(out, dtype=np.uint64)


@numba.njit(cache=True, inline="always")
def _rotl(x, k):
    return (x << np.uint64(k)) | (x >> np.uint64(64 - k))


@numba.njit(cache=True)
def _next_u64(s):
    result = _rotl(s[1] * np.uint64(5), 7) * np.uint64(9)
    t = s[1] << np.uint64(17)
    s[2] ^= s[0]
    s[3] ^= s[1]
    s[1] ^= s[2]
    s[0] ^= s[3]
    s[2] ^= t
    s[3] = _rotl(s[3], 45)
    return result


@numba.njit(cache=True)
def _fill_u64(s, out):
    for i in range(out.shape[0]):
        out[i] = _next_u64(s)


@numba.njit(cache=True)
def _fill_uniform(s, out):
    for i in range(out.shape[0]):
        out[i] = np.float64(_next_u64(s) >> np.uint64(11)) * _INV_2_53


@numba.njit(cache=True)
def _fill_normal_pairs(s, out):
    # out has even length; each pair consumes two uniforms
    for i in range(0, out.shape[0], 2):
        u1 = 1.0 - np.float64(_next_u64(s) >> np.uint64(11)) * _INV_2_53
        u2 = np.float64(_next_u64(s) >> np.uint64(11)) * _INV_2_53
        r = np.sqrt(-2.0 * np.log(u1))
        out[i] = r * np.cos(_TWO_PI * u2)
        out[i + 1] = r * np.sin(_TWO_PI * u2)


class Xoshiro256:
    """Seeded xoshiro256** stream.

    Not thread-safe; each trial owns its own instance.
    """

    def __init__(self, seed: int):
        self.seed = int(seed)
        self._state = seed_state(self.seed)
        self._spare: float | None = None

    @property
    def state(self) -> tuple[int, ...]:
        return tuple(int(v) for v in self._state)

    def next_u64(self, n: int) -> np.ndarray:
        out = np.empty(n, dtype=np.uint64)
        _fill_u64(self._state, out)
        return out

    def uniform(self, shape) -> np.ndarray:
        out = np.empty(int(np.prod(shape, dtype=np.int64)), dtype=np.float64)
        self._spare = None  # a pending Gaussian spare is dropped
        _fill_uniform(self._state, out)
        return out.reshape(shape)

    def normal(self, shape) -> np.ndarray:
        n = int(np.prod(shape, dtype=np.int64))
        out = np.empty(n, dtype=np.float64)
        start = 0
        if n and self._spare is not None:
            out[0] = self._spare
            self._spare = None
            start = 1
        rest = n - start
        pairs = np.empty(rest + (rest & 1), dtype=np.float64)
        _fill_normal_pairs(self._state, pairs)
        out[start:] = pairs[:rest]
        if rest & 1:
            self._spare = float(pairs[-1])
        return out.reshape(shape)


def reference_u64(seed: int, n: int) -> list[int]:
    """Pure-Python xoshiro256** used to cross-check the compiled stream."""
    s = [int(v) for v in seed_state(seed)]
    out = []
    for _ in range(n):
        out.append(_ref_step(s))
    return out


def _ref_rotl(x: int, k: int) -> int:
    return ((x << k) | (x >> (64 - k))) & _MASK


def _ref_step(s: list[int]) -> int:
    result = (_ref_rotl((s[1] * 5) & _MASK, 7) * 9) & _MASK
    t = (s[1] << 17) & _MASK
    s[2] ^= s[0]
    s[3] ^= s[1]
    s[1] ^= s[2]
    s[0] ^= s[3]
    s[2] ^= t
    s[3] = _ref_rotl(s[3], 45)
    return result
