"""Pinned pseudo-random generator for reproducible corpus sampling.

The generator is xoshiro256** (Blackman and Vigna) with its 256-bit
state filled from the seed by four splitmix64 steps, the initialization
its authors recommend.  Bounded integers use rejection sampling, so the
output is unbiased and identical on every platform.
"""

from __future__ import annotations

from typing import Sequence, TypeVar

T = TypeVar("T")

MASK64 = (1 << 64) - 1


def splitmix64(state: int) -> tuple[int, int]:
    """Advance a splitmix64 state; returns ``(new_state, output)``."""
    state = (state + 0x9E3779B97F4A7C15) & MASK64
    z = state
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK64
    return state, z ^ (z >> 31)


def _rotl(x: int, k: int) -> int:
    return ((x << k) | (x >> (64 - k))) & MASK64


class Xoshiro256StarStar:
    def __init__(self, seed: int):
        sm = seed & MASK64
        state = []
        for _ in range(4):
            sm, out = splitmix64(sm)
            state.append(out)
        self._s = state

    @classmethod
    def from_state(cls, state: Sequence[int]) -> "Xoshiro256StarStar":
        if len(state) != 4 or not any(state):
            raise ValueError("state must be four 64-bit words, not all zero")
        rng = cls.__new__(cls)
        rng._s = [s & MASK64 for s in state]
        return rng

    def next_u64(self) -> int:
        s = self._s
        result = (_rotl((s[1] * 5) & MASK64, 7) * 9) & MASK64
        t = (s[1] << 17) & MASK64
        s[2] ^= s[0]
        s[3] ^= s[1]
        s[1] ^= s[2]
        s[0] ^= s[3]
        s[2] ^= t
        s[3] = _rotl(s[3], 45)
        return result

    def below(self, n: int) -> int:
        """Uniform integer in ``[0, n)``."""
        if n <= 0:
            raise ValueError("n must be positive")
        limit = ((MASK64 + 1) // n) * n
        while True:
            x = self.next_u64()
            if x < limit:
                return x % n


def sample_indices(population: int, n: int, seed: int) -> list[int]:
    """First ``n`` positions of a seeded partial Fisher-Yates shuffle."""
    if not 0 <= n <= population:
        raise ValueError(f"cannot sample {n} items from {population}")
    rng = Xoshiro256StarStar(seed)
    idx = list(range(population))
    for i in range(n):
        j = i + rng.below(population - i)
        idx[i], idx[j] = idx[j], idx[i]
    return idx[:n]


def sample(records: Sequence[T], n: int, seed: int) -> list[T]:
    return [records[i] for i in sample_indices(len(records), n, seed)]
