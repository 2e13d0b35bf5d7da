"""Seeded randomness for the client.

Every experiment is reproducible from a single integer seed.  Independent
sub-streams are derived by hashing ``(seed, label, counter)`` so that adding
draws in one protocol never shifts the randomness seen by another.
"""
from __future__ import annotations

import hashlib
import random

__all__ = ["RandomSource", "ConstantRandom", "derive_seed"]


def derive_seed(seed: int, label: str) -> int:
    """Hash a parent seed and a label into a fresh 128-bit seed."""
    h = hashlib.blake2b(f"{seed}:{label}".encode(), digest_size=16)
    return int.from_bytes(h.digest(), "little")


class RandomSource:
    """Client-side randomness: uniform bits, bounded integers, sub-streams.

    :param seed: root seed (any non-negative int).
    :param label: stream label; two sources with the same seed but different
        labels are independent.
    """

    def __init__(self, seed: int = 0, label: str = "root"):
        self.seed = seed
        self.label = label
        self._r = random.Random(derive_seed(seed, label))
        self._spawned = 0
        # bound methods, looked up once; these sit on hot paths
        self.bits = self._r.getrandbits
        self.below = getattr(self._r, "_randbelow", self._r.randrange)

    def blocks(self, count: int, width: int) -> list[int]:
        """``count`` independent uniform ``width``-bit integers."""
        g = self._r.getrandbits
        return [g(width) for _ in range(count)]

    def spawn(self, label: str = "sub") -> "RandomSource":
        """Derive an independent child stream.  Deterministic in call order."""
        self._spawned += 1
        return type(self)(self.seed, f"{self.label}/{label}#{self._spawned}")

    def __repr__(self) -> str:
        return f"{type(self).__name__}(seed={self.seed!r}, label={self.label!r})"


class ConstantRandom(RandomSource):
    """A deliberately broken source that always returns zero.

    Used as the negative control for the statistical audits: shares become
    predictable and every generated permutation is the same fixed one.
    """

    def __init__(self, seed: int = 0, label: str = "const"):
        super().__init__(seed, label)
        self.bits = lambda k: 0
        self.below = lambda n: 0

    def blocks(self, count: int, width: int) -> list[int]:
        return [0] * count
