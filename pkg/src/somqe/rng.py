"""Portable seeded random streams.

Every random draw in this package comes from SplitMix64.  The whole generator
is five published constants and fits in a dozen lines of any language, so a
trained map can be replayed bit for bit from a 64-bit seed outside Python.
Constants are the public-domain reference ones: state increment
0x9E3779B97F4A7C15, finalizer multipliers 0xBF58476D1CE4E5B9 and
0x94D049BB133111EB, shifts 30, 27, 31.

Model initialization and training-sample draws use separate named substreams
so changing the iteration count never perturbs the initial grid.  Substream k
is seeded with the (k+1)-th output of a parent SplitMix64 seeded with the run
seed.
"""

from __future__ import annotations

_MASK64 = (1 << 64) - 1

# substream indices, fixed by the file format and CLI contract
INIT_STREAM = 0
SAMPLE_STREAM = 1


class SplitMix64:
    __slots__ = ("_state",)

    def __init__(self, seed: int) -> None:
        self._state = seed & _MASK64

    def next_uint64(self) -> int:
        self._state = (self._state + 0x9E3779B97F4A7C15) & _MASK64
        z = self._state
        z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
        z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
        return z ^ (z >> 31)

    def next_index(self, n: int) -> int:
        """Uniform draw from range(n), defined as next_uint64() mod n.

        The modulo bias is below 2**-40 for any n this package uses and the
        simple rule keeps foreign reimplementations exact.
        """
        if n <= 0:
            raise ValueError("n must be positive")
        return self.next_uint64() % n


def substream_seed(seed: int, stream: int) -> int:
    """Seed of named substream `stream` derived from the run seed."""
    if stream < 0:
        raise ValueError("stream must be non-negative")
    parent = SplitMix64(seed)
    out = 0
    for _ in range(stream + 1):
        out = parent.next_uint64()
    return out
