"""Portable pseudo-random source for the synthetic generator.

xoshiro256** (Blackman & Vigna) seeded through splitmix64. Everything is
integer arithmetic on Python ints plus ``math.log``/``math.cos``, so the
stream is identical on every platform and numpy version.
"""

from __future__ import annotations

import math

MASK64 = (1 << 64) - 1


def splitmix64(state: int) -> tuple[int, int]:
    """Advance a splitmix64 state; returns (new_state, output)."""
    state = (state + 0x9E3779B97F4A7C15) & MASK64
    z = state
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK64
    return state, z ^ (z >> 31)


def _rotl(x: int, k: int) -> int:
    return ((x << k) | (x >> (64 - k))) & MASK64


class Xoshiro256:
    __slots__ = ("_s", "_spare")

    def __init__(self, seed: int):
        sm = seed & MASK64
        words = []
        for _ in range(4):
            sm, out = splitmix64(sm)
            words.append(out)
        self._s = words
        self._spare: float | None = None

    @classmethod
    def from_state(cls, state: list[int]) -> Xoshiro256:
        if len(state) != 4 or not any(state):
            raise ValueError("xoshiro256 state must be four words, not all zero")
        rng = cls.__new__(cls)
        rng._s = [w & MASK64 for w in state]
        rng._spare = None
        return rng

    def next_u64(self) -> int:
        s0, s1, s2, s3 = self._s
        result = (_rotl((s1 * 5) & MASK64, 7) * 9) & MASK64
        t = (s1 << 17) & MASK64
        s2 ^= s0
        s3 ^= s1
        s1 ^= s2
        s0 ^= s3
        s2 ^= t
        s3 = _rotl(s3, 45)
        self._s = [s0, s1, s2, s3]
        return result

    def random(self) -> float:
        """Uniform on [0, 1) with 53 bits of precision."""
        return (self.next_u64() >> 11) * (1.0 / (1 << 53))

    def uniform(self, lo: float, hi: float) -> float:
        return lo + (hi - lo) * self.random()

    def randint(self, lo: int, hi: int) -> int:
        """Uniform integer in [lo, hi] by rejection (unbiased)."""
        n = hi - lo + 1
        if n <= 0:
            raise ValueError("empty range")
        bits = n.bit_length()
        while True:
            r = self.next_u64() >> (64 - bits)
            if r < n:
                return lo + r

    def normal(self, mean: float = 0.0, std: float = 1.0) -> float:
        """Box-Muller; the second variate of each pair is cached."""
        if self._spare is not None:
            z, self._spare = self._spare, None
            return mean + std * z
        u1 = 1.0 - self.random()  # (0, 1]
        u2 = self.random()
        r = math.sqrt(-2.0 * math.log(u1))
        z0 = r * math.cos(2.0 * math.pi * u2)
        self._spare = r * math.sin(2.0 * math.pi * u2)
        return mean + std * z0

    def exponential(self, scale: float = 1.0) -> float:
        return -scale * math.log(1.0 - self.random())

    def poisson(self, lam: float) -> int:
        # Knuth's product method on chunks of <= 30 (sum of Poissons is Poisson).
        if lam < 0:
            raise ValueError("negative rate")
        total = 0
        while lam > 0:
            chunk = min(lam, 30.0)
            lam -= chunk
            limit = math.exp(-chunk)
            k, p = 0, self.random()
            while p > limit:
                k += 1
                p *= self.random()
            total += k
        return total

    def choice_index(self, n: int) -> int:
        return self.randint(0, n - 1)
