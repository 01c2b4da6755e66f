"""Deterministic random streams.

Every stochastic step in the pipeline draws from a named stream derived
from (master seed, purpose tag, zone index).  Streams are independent of
execution order and thread scheduling: adding a zone to a run never
perturbs another zone's draws.
"""

from __future__ import annotations

MASK64 = (1 << 64) - 1
GOLDEN = 0x9E3779B97F4A7C15

_FNV_OFFSET = 0xCBF29CE484222325
_FNV_PRIME = 0x100000001B3


def fnv1a64(data: bytes) -> int:
    """64-bit FNV-1a hash, used to turn purpose tags into integers."""
    h = _FNV_OFFSET
    for b in data:
        h = ((h ^ b) * _FNV_PRIME) & MASK64
    return h


def splitmix64(state: int) -> tuple[int, int]:
    """One splitmix64 step: returns (output, next_state)."""
    state = (state + GOLDEN) & MASK64
    z = state
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK64
    return z ^ (z >> 31), state


class RandomStream:
    """splitmix64 stream keyed by (master seed, purpose, zone index).

    Uniforms are the top 53 bits of the 64-bit output divided by 2**53,
    so two builds of this toolkit produce bit-identical samples.
    """

    __slots__ = ("master_seed", "purpose", "zone_index", "_state")

    def __init__(self, master_seed: int, purpose: str, zone_index: int = 0):
        self.master_seed = master_seed & MASK64
        self.purpose = purpose
        self.zone_index = zone_index
        tag = fnv1a64(purpose.encode("utf-8"))
        key = (tag + (zone_index * GOLDEN)) & MASK64
        # seed the stream with one splitmix64 step over the derivation key
        self._state = splitmix64(self.master_seed ^ key)[0]

    def next_u64(self) -> int:
        value, self._state = splitmix64(self._state)
        return value

    def next_float(self) -> float:
        """Uniform in [0, 1): top 53 bits / 2**53."""
        return (self.next_u64() >> 11) * (1.0 / (1 << 53))

    def next_below(self, n: int) -> int:
        """Uniform integer in [0, n), via the [0,1) uniform."""
        return int(self.next_float() * n)

    def shuffle(self, items: list) -> None:
        """In-place Fisher-Yates shuffle."""
        for i in range(len(items) - 1, 0, -1):
            j = self.next_below(i + 1)
            items[i], items[j] = items[j], items[i]
