"""Seeded random streams used by the engine and the experiment harnesses."""

from __future__ import annotations

import random

import numpy as np


def child_seed(master: int, index: int) -> int:
    """Derive an independent 64-bit seed for trial ``index`` of a run."""
    ss = np.random.SeedSequence([int(master) & (2**64 - 1), int(index)])
    return int(ss.generate_state(1, dtype=np.uint64)[0])


class RngStream:
    """Deterministic scalar draws with a running draw counter.

    Backed by the stdlib Mersenne Twister, whose output for a given seed is
    identical on every platform. Poisson draws are delegated to a numpy
    generator seeded from the stream itself.
    """

    def __init__(self, seed: int = 0):
        self.seed = int(seed) & (2**64 - 1)
        self.counter = 0
        self._r = random.Random(self.seed)

    def random(self) -> float:
        self.counter += 1
        return self._r.random()

    def randbelow(self, n: int) -> int:
        self.counter += 1
        return self._r.randrange(n)

    def randint(self, a: int, b: int) -> int:
        self.counter += 1
        return self._r.randint(a, b)

    def expovariate(self, rate: float) -> float:
        self.counter += 1
        return self._r.expovariate(rate)

    def sample(self, n_population: int, n: int) -> list[int]:
        self.counter += 1
        return self._r.sample(range(n_population), n)

    def shuffle(self, items: list) -> None:
        self.counter += 1
        self._r.shuffle(items)

    def getrandbits(self, k: int) -> int:
        self.counter += 1
        return self._r.getrandbits(k)

    def poisson(self, mean: float) -> int:
        if mean <= 0:
            return 0
        self.counter += 1
        gen = np.random.Generator(np.random.PCG64(self._r.getrandbits(64)))
        return int(gen.poisson(mean))

    def numpy(self) -> np.random.Generator:
        """A numpy generator seeded from this stream (for vectorised draws)."""
        self.counter += 1
        return np.random.Generator(np.random.PCG64(self._r.getrandbits(64)))
