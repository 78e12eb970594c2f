"""Seeded, splittable random streams.

Every stream is a numpy ``PCG64`` generator seeded through
``SeedSequence(entropy=seed, spawn_key=key)``.  A stream is identified by
``(seed, key)`` where ``key`` is a tuple of non-negative integers; the
first key component is the user-facing stream index.  Child streams append
to the key, so ``substream(seed, k)`` is simply ``RngStream(seed, k)`` and
``RngStream(seed, k).child(j)`` is the stream keyed ``(k, j)``.

Both ``PCG64`` and ``SeedSequence`` are specified bit-for-bit by numpy, so a
given ``(seed, key)`` yields the same values on every platform.
"""

from __future__ import annotations

import zlib
from fractions import Fraction

import numpy as np

RNG_NAME = "numpy.random.PCG64/SeedSequence(entropy=seed, spawn_key=key)"

_MASK64 = (1 << 64) - 1
_BUFFER = 256


def _key_part(part) -> int:
    if isinstance(part, str):
        # stable across runs, unlike hash()
        return zlib.crc32(part.encode("utf-8"))
    part = int(part)
    if part < 0:
        raise ValueError("stream key components must be non-negative")
    return part


class RngStream:
    """Buffered 64-bit random source with exact integer helpers."""

    def __init__(self, seed: int, stream: int = 0, key: tuple = ()):
        self.seed = int(seed) & _MASK64
        self.key = (_key_part(stream),) + tuple(_key_part(k) for k in key)
        ss = np.random.SeedSequence(entropy=self.seed, spawn_key=self.key)
        self._bitgen = np.random.PCG64(ss)
        self._gen = None
        self._words: list[int] = []
        self._fill = 16  # short first refill; many streams draw only a few words
        self._bits = 0
        self._nbits = 0

    @property
    def stream(self) -> int:
        return self.key[0]

    def child(self, *key) -> "RngStream":
        """Independent stream keyed by this stream's key extended with ``key``."""
        return RngStream(self.seed, self.key[0], self.key[1:] + tuple(key))

    def __repr__(self):
        return f"RngStream(seed={self.seed}, key={self.key})"

    def __reduce__(self):
        # streams are rebuilt from their identity, not their state
        return (_rebuild, (self.seed, self.key))

    @property
    def generator(self) -> np.random.Generator:
        """numpy Generator sharing this stream's bit generator (for vector draws)."""
        if self._gen is None:
            self._gen = np.random.Generator(self._bitgen)
        return self._gen

    def u64(self) -> int:
        if not self._words:
            self._words = self._bitgen.random_raw(self._fill).tolist()
            self._words.reverse()
            self._fill = _BUFFER
        return self._words.pop()

    def bit(self) -> int:
        if self._nbits == 0:
            self._bits = self.u64()
            self._nbits = 64
        b = self._bits & 1
        self._bits >>= 1
        self._nbits -= 1
        return b

    def randbits(self, k: int) -> int:
        if k <= 0:
            return 0
        out = 0
        got = 0
        while got < k:
            out |= self.u64() << got
            got += 64
        return out & ((1 << k) - 1)

    def randbelow(self, n: int) -> int:
        """Exactly uniform integer in ``[0, n)`` by rejection on raw bits."""
        if n <= 0:
            raise ValueError("randbelow needs n >= 1")
        if n == 1:
            return 0
        k = (n - 1).bit_length()
        while True:
            r = self.randbits(k)
            if r < n:
                return r

    def random(self) -> float:
        """Uniform double in ``[0, 1)`` with 53 random bits."""
        return (self.u64() >> 11) * (1.0 / 9007199254740992.0)

    def bernoulli(self, num: int, den: int) -> bool:
        """True with probability exactly ``num/den`` (``0 <= num <= den``)."""
        w = self.u64()
        lo = w * den
        target = num << 64
        if lo + den <= target:
            return True
        if lo >= target:
            return False
        return LazyUniform(self, w).less_than(num, den)

    def uniform(self) -> "LazyUniform":
        return LazyUniform(self)


def _rebuild(seed, key):
    return RngStream(seed, key[0], key[1:])


class LazyUniform:
    """A uniform variate on ``[0, 1)`` whose binary expansion is drawn on demand.

    Comparisons against exact rationals consume only as many bits as needed to
    decide them, so inversion against exact CDF values is exact.
    """

    __slots__ = ("_rng", "num", "nbits")

    def __init__(self, rng: RngStream, first: int | None = None):
        self._rng = rng
        self.num = rng.u64() if first is None else first
        self.nbits = 64

    def refine(self):
        self.num = (self.num << 64) | self._rng.u64()
        self.nbits += 64

    def less_than(self, num: int, den: int) -> bool:
        """Decide ``U < num/den`` exactly (``den > 0``)."""
        while True:
            lo = self.num * den
            target = num << self.nbits
            if lo >= target:
                return False
            if lo + den <= target:
                return True
            self.refine()

    def less_than_dyadic(self, num: int, exp: int) -> bool:
        """Decide ``U < num / 2**exp`` exactly."""
        while self.nbits < exp:
            self.refine()
        shift = self.nbits - exp
        return self.num < (num << shift)

    def complement(self, rel_bits: int = 60) -> Fraction:
        """Return an interval midpoint for ``1 - U`` accurate to ``rel_bits`` relative bits."""
        while True:
            top = (1 << self.nbits) - self.num  # 1 - U lies in (top-1, top] / 2**nbits
            if top > (1 << rel_bits):
                return Fraction(2 * top - 1, 1 << (self.nbits + 1))
            self.refine()
