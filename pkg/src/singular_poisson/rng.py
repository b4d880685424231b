"""Counter-based random streams.

Every draw is a pure function of ``(seed, stream, index)``: a Philox4x32-10
block cipher keyed by the 64-bit seed is applied to the 128-bit counter
``(index // 2, stream)``.  Each cipher block yields two 53-bit uniforms.
Nothing is stateful, so any subset of draws can be produced in any order,
by any number of workers, with identical results.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from numba import njit
from scipy import stats

__all__ = ["RngStream", "philox4x32", "uniforms", "derive_seed", "poisson_inverse"]

_U64_MAX = 2**64 - 1
_M0 = 0xD2511F53
_M1 = 0xCD9E8D57
_W0 = 0x9E3779B9
_W1 = 0xBB67AE85
_MASK = 0xFFFFFFFF


@njit(cache=True)
def _philox_block(c0, c1, c2, c3, k0, k1):
    m0 = np.uint64(_M0)
    m1 = np.uint64(_M1)
    mask = np.uint64(_MASK)
    s32 = np.uint64(32)
    for r in range(10):
        if r > 0:
            k0 = (k0 + np.uint64(_W0)) & mask
            k1 = (k1 + np.uint64(_W1)) & mask
        p0 = c0 * m0
        p1 = c2 * m1
        n0 = (p1 >> s32) ^ c1 ^ k0
        n1 = p1 & mask
        n2 = (p0 >> s32) ^ c3 ^ k1
        n3 = p0 & mask
        c0, c1, c2, c3 = n0, n1, n2, n3
    return c0, c1, c2, c3


@njit(cache=True)
def _uniforms_kernel(seed, stream, index, out):
    mask = np.uint64(_MASK)
    s32 = np.uint64(32)
    for i in range(out.size):
        block = index[i] >> np.uint64(1)
        x0, x1, x2, x3 = _philox_block(
            block & mask, block >> s32, stream[i] & mask, stream[i] >> s32,
            seed[i] & mask, seed[i] >> s32,
        )
        if index[i] & np.uint64(1):
            hi, lo = x2, x3
        else:
            hi, lo = x0, x1
        bits = ((hi >> np.uint64(5)) << np.uint64(26)) | (lo >> np.uint64(6))
        out[i] = (np.float64(bits) + 0.5) * 1.1102230246251565e-16  # 2**-53


def philox4x32(c0, c1, c2, c3, k0, k1):
    """One Philox4x32-10 block on 32-bit words; returns the four output words."""
    return tuple(int(w) for w in _philox_block(*(np.uint64(v) for v in (c0, c1, c2, c3, k0, k1))))


def uniforms(seed, stream, index):
    """Uniform draws on the open interval (0, 1).

    ``seed``, ``stream`` and ``index`` broadcast against each other; all are
    interpreted as unsigned 64-bit integers.
    """
    seed, stream, index = np.broadcast_arrays(
        np.asarray(seed, dtype=np.uint64),
        np.asarray(stream, dtype=np.uint64),
        np.asarray(index, dtype=np.uint64),
    )
    out = np.empty(seed.shape, dtype=np.float64)
    flat = [np.array(v, dtype=np.uint64, order="C").reshape(-1) for v in (seed, stream, index)]
    _uniforms_kernel(*flat, out.reshape(-1))
    return out


@njit(cache=True)
def _poisson_inverse_small(u, mu, out):
    p0 = math.exp(-mu)
    for i in range(u.size):
        k = 0
        p = p0
        cdf = p0
        while u[i] > cdf and k < 100000:
            k += 1
            p *= mu / k
            cdf += p
        out[i] = k


def poisson_inverse(u, mu):
    """Poisson(mu) quantile of each uniform ``u`` (smallest k with CDF(k) >= u)."""
    u = np.asarray(u, dtype=np.float64)
    if mu <= 0:
        return np.zeros(u.shape, dtype=np.int64)
    if mu <= 30.0:
        out = np.empty(u.size, dtype=np.int64)
        _poisson_inverse_small(u.ravel(), float(mu), out)
        return out.reshape(u.shape)
    return stats.poisson.ppf(u, mu).astype(np.int64)


def derive_seed(seed, *labels):
    """Mix integer labels into a 64-bit seed (splitmix64 finaliser chain)."""
    x = int(seed) & _U64_MAX
    for label in labels:
        x = (x + 0x9E3779B97F4A7C15 + (int(label) & _U64_MAX)) & _U64_MAX
        z = x
        z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _U64_MAX
        z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _U64_MAX
        x = z ^ (z >> 31)
    return x


@dataclass(frozen=True)
class RngStream:
    seed: int
    stream_index: int = 0

    def __post_init__(self):
        for name in ("seed", "stream_index"):
            v = getattr(self, name)
            if not 0 <= int(v) <= _U64_MAX:
                raise ValueError(f"{name} must be an unsigned 64-bit integer, got {v}")

    def uniforms(self, start, count):
        idx = np.arange(count, dtype=np.uint64) + np.uint64(start)
        return uniforms(self.seed, self.stream_index, idx)
