"""Deterministic random streams built on xoshiro256**.

Every stochastic choice in the toolkit (parameter init, distractor
sampling, shuffling, chance baseline) draws from a named stream derived
from a master seed, so the same (seed, stream name) always yields the
same sequence regardless of platform or call order elsewhere.
"""

from __future__ import annotations

import math

_MASK64 = (1 << 64) - 1


def _splitmix64(state: int) -> tuple[int, int]:
    state = (state + 0x9E3779B97F4A7C15) & _MASK64
    z = state
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
    return state, z ^ (z >> 31)


def _fnv1a64(text: str) -> int:
    h = 0xCBF29CE484222325
    for byte in text.encode("utf-8"):
        h = ((h ^ byte) * 0x100000001B3) & _MASK64
    return h


def _rotl(x: int, k: int) -> int:
    return ((x << k) | (x >> (64 - k))) & _MASK64


class RandomStream:
    """xoshiro256** generator seeded from (master seed, stream name)."""

    def __init__(self, seed: int, name: str = "root"):
        self.seed = int(seed) & _MASK64
        self.name = name
        state = self.seed ^ _fnv1a64(name)
        words = []
        for _ in range(4):
            state, word = _splitmix64(state)
            words.append(word)
        if not any(words):  # all-zero state is a fixed point of xoshiro
            words[0] = 1
        self._s = words
        self._spare_normal: float | None = None

    def stream(self, name: str) -> "RandomStream":
        """Derive an independent child stream from the same master seed."""
        return RandomStream(self.seed, f"{self.name}/{name}")

    def next_u64(self) -> int:
        s0, s1, s2, s3 = self._s
        result = (_rotl((s1 * 5) & _MASK64, 7) * 9) & _MASK64
        t = (s1 << 17) & _MASK64
        s2 ^= s0
        s3 ^= s1
        s1 ^= s2
        s0 ^= s3
        s2 ^= t
        s3 = _rotl(s3, 45)
        self._s = [s0, s1, s2, s3]
        return result

    def random(self) -> float:
        """Uniform float64 in [0, 1) with 53 random bits."""
        return (self.next_u64() >> 11) * (2.0 ** -53)

    def uniform(self, low: float, high: float, shape=None):
        import numpy as np

        if shape is None:
            return low + (high - low) * self.random()
        n = int(np.prod(shape)) if shape else 1
        vals = [low + (high - low) * self.random() for _ in range(n)]
        return np.array(vals, dtype=np.float64).reshape(shape)

    def normal(self, mean: float = 0.0, std: float = 1.0, shape=None):
        import numpy as np

        if shape is None:
            return mean + std * self._next_normal()
        n = int(np.prod(shape)) if shape else 1
        vals = [mean + std * self._next_normal() for _ in range(n)]
        return np.array(vals, dtype=np.float64).reshape(shape)

    def _next_normal(self) -> float:
        # Box-Muller; the second variate is cached for the next call.
        if self._spare_normal is not None:
            z = self._spare_normal
            self._spare_normal = None
            return z
        u1 = self.random()
        while u1 <= 0.0:
            u1 = self.random()
        u2 = self.random()
        radius = math.sqrt(-2.0 * math.log(u1))
        theta = 2.0 * math.pi * u2
        self._spare_normal = radius * math.sin(theta)
        return radius * math.cos(theta)

    def randint(self, n: int) -> int:
        """Uniform integer in [0, n), unbiased via rejection sampling."""
        if n <= 0:
            raise ValueError(f"randint bound must be positive, got {n}")
        limit = _MASK64 - (_MASK64 + 1) % n
        while True:
            x = self.next_u64()
            if x <= limit:
                return x % n

    def shuffle(self, items: list) -> None:
        """In-place Fisher-Yates shuffle."""
        for i in range(len(items) - 1, 0, -1):
            j = self.randint(i + 1)
            items[i], items[j] = items[j], items[i]

    def sample(self, items, k: int) -> list:
        """k distinct elements, uniform without replacement."""
        n = len(items)
        if k > n:
            raise ValueError(f"cannot sample {k} from population of {n}")
        picked: dict[int, int] = {}
        out = []
        for i in range(k):
            j = i + self.randint(n - i)
            vi = picked.get(i, i)
            vj = picked.get(j, j)
            out.append(items[vj])
            picked[j] = vi
        return out

    def choice(self, items):
        return items[self.randint(len(items))]
