"""Counter-based random streams (Philox4x32-10).

A stream is addressed by ``(seed, stream_id)``; draw number ``n`` of the
stream is the Philox block of counter ``(n, stream_id)`` under key ``seed``.
Any draw can therefore be recomputed independently of how paths are
distributed over threads.  Each block yields two uniforms on the open
interval (0, 1) with 52 random bits each.
"""
from __future__ import annotations

import numpy as np

MASK32 = 0xFFFFFFFF
PHILOX_M0 = 0xD2511F53
PHILOX_M1 = 0xCD9E8D57
PHILOX_W0 = 0x9E3779B9
PHILOX_W1 = 0xBB67AE85
PHILOX_ROUNDS = 10
_TWO_M52 = 2.0 ** -52


def philox4x32(ctr, key):
    """Reference scalar Philox4x32-10 on Python ints."""
    c0, c1, c2, c3 = ctr
    k0, k1 = key
    for _ in range(PHILOX_ROUNDS):
        p0 = PHILOX_M0 * c0
        p1 = PHILOX_M1 * c2
        c0, c1, c2, c3 = ((p1 >> 32) ^ c1 ^ k0, p1 & MASK32,
                          (p0 >> 32) ^ c3 ^ k1, p0 & MASK32)
        k0 = (k0 + PHILOX_W0) & MASK32
        k1 = (k1 + PHILOX_W1) & MASK32
    return c0, c1, c2, c3


def philox4x32_array(c0, c1, c2, c3, k0, k1):
    """Vectorised Philox4x32-10; inputs are uint64 arrays holding 32-bit words."""
    m0 = np.uint64(PHILOX_M0)
    m1 = np.uint64(PHILOX_M1)
    mask = np.uint64(MASK32)
    sh = np.uint64(32)
    k0 = np.asarray(k0, dtype=np.uint64)
    k1 = np.asarray(k1, dtype=np.uint64)
    for _ in range(PHILOX_ROUNDS):
        p0 = m0 * c0
        p1 = m1 * c2
        c0, c1, c2, c3 = (p1 >> sh) ^ c1 ^ k0, p1 & mask, (p0 >> sh) ^ c3 ^ k1, p0 & mask
        k0 = (k0 + np.uint64(PHILOX_W0)) & mask
        k1 = (k1 + np.uint64(PHILOX_W1)) & mask
    return c0, c1, c2, c3


def _to_unit(lo, hi):
    """Two 32-bit words -> double in (0, 1) from the top 52 bits."""
    return (((hi << 32) | lo) >> 12) + 0.5


def uniform_pair(seed, stream_id, counter):
    """Scalar pair of uniforms for block ``counter`` of stream ``stream_id``."""
    x0, x1, x2, x3 = philox4x32(
        (counter & MASK32, (counter >> 32) & MASK32, stream_id & MASK32, (stream_id >> 32) & MASK32),
        (seed & MASK32, (seed >> 32) & MASK32),
    )
    return _to_unit(x0, x1) * _TWO_M52, _to_unit(x2, x3) * _TWO_M52


def uniform_pairs(seed, stream_ids, counters):
    """Vectorised :func:`uniform_pair` over arrays of streams and counters."""
    stream_ids = np.asarray(stream_ids, dtype=np.uint64)
    counters = np.asarray(counters, dtype=np.uint64)
    stream_ids, counters = np.broadcast_arrays(stream_ids, counters)
    mask = np.uint64(MASK32)
    sh = np.uint64(32)
    seed = int(seed) & 0xFFFFFFFFFFFFFFFF
    x0, x1, x2, x3 = philox4x32_array(
        counters & mask, counters >> sh, stream_ids & mask, stream_ids >> sh,
        np.uint64(seed & MASK32), np.uint64(seed >> 32),
    )
    scale = np.float64(_TWO_M52)
    u1 = (((x1 << sh) | x0) >> np.uint64(12)).astype(np.float64) + 0.5
    u2 = (((x3 << sh) | x2) >> np.uint64(12)).astype(np.float64) + 0.5
    return u1 * scale, u2 * scale


class RngStream:
    """One reproducible random stream, owned by a single path or worker.

    Parameters
    ----------
    seed, stream_id : int
        64-bit identifiers of the stream.
    counter : int
        Index of the next block to draw.
    """

    __slots__ = ("seed", "stream_id", "counter")

    def __init__(self, seed, stream_id=0, counter=0):
        for name, v in (("seed", seed), ("stream_id", stream_id), ("counter", counter)):
            if not 0 <= int(v) < 2 ** 64:
                raise ValueError(f"{name} must be a 64-bit unsigned integer")
        self.seed = int(seed)
        self.stream_id = int(stream_id)
        self.counter = int(counter)

    def __repr__(self):
        return f"RngStream(seed={self.seed}, stream_id={self.stream_id}, counter={self.counter})"

    def next_pair(self):
        pair = uniform_pair(self.seed, self.stream_id, self.counter)
        self.counter += 1
        return pair

    def pairs(self, n):
        """``n`` consecutive blocks as two arrays of uniforms."""
        ctr = np.arange(self.counter, self.counter + n, dtype=np.uint64)
        self.counter += n
        return uniform_pairs(self.seed, self.stream_id, ctr)
