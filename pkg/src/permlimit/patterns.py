"""Permutations of integer blocks, pattern containment for S_3, and enumeration."""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from itertools import combinations
from typing import Iterator, Sequence

EXHAUSTIVE_BOUND = 10


class Pattern(str, Enum):
    P123 = "123"
    P132 = "132"
    P213 = "213"
    P231 = "231"
    P312 = "312"
    P321 = "321"

    @classmethod
    def parse(cls, s) -> "Pattern":
        if isinstance(s, Pattern):
            return s
        try:
            return cls(str(s))
        except ValueError:
            raise ValueError(f"unknown pattern {s!r}; expected one of 123 132 213 231 312 321") from None

    @property
    def word(self) -> tuple:
        return tuple(int(c) for c in self.value)

    def __str__(self):
        return self.value


ALL_PATTERNS = tuple(Pattern)


@dataclass(frozen=True)
class Permutation:
    """A bijection onto the block [start, start + len - 1], stored as one-line values."""

    values: tuple
    start: int = 1

    def __post_init__(self):
        vals = tuple(int(v) for v in self.values)
        object.__setattr__(self, "values", vals)
        if sorted(vals) != list(range(self.start, self.start + len(vals))):
            raise ValueError(f"values {vals} are not a permutation of the block starting at {self.start}")

    def __len__(self):
        return len(self.values)

    def __iter__(self):
        return iter(self.values)

    def __getitem__(self, i):
        return self.values[i]

    @property
    def block(self) -> tuple:
        return (self.start, self.start + len(self.values) - 1)

    def standardize(self) -> "Permutation":
        off = self.start - 1
        return Permutation(tuple(v - off for v in self.values), 1)

    def shifted(self, offset: int) -> "Permutation":
        return Permutation(tuple(v + offset for v in self.values), self.start + offset)

    def reverse(self) -> "Permutation":
        return Permutation(self.values[::-1], self.start)

    def complement(self) -> "Permutation":
        s = 2 * self.start + len(self.values) - 1
        return Permutation(tuple(s - v for v in self.values), self.start)

    def inverse(self) -> "Permutation":
        n = len(self.values)
        inv = [0] * n
        for i, v in enumerate(self.values):
            inv[v - self.start] = i + self.start
        return Permutation(tuple(inv), self.start)

    def serialize(self) -> str:
        body = ",".join(str(v) for v in self.values)
        if self.start != 1:
            return f"start={self.start};{body}"
        return body

    @classmethod
    def parse(cls, text: str) -> "Permutation":
        text = text.strip()
        start = 1
        if text.startswith("start="):
            head, _, text = text.partition(";")
            start = int(head[len("start="):])
        vals = tuple(int(t) for t in text.split(",")) if text else ()
        return cls(vals, start)

    def __str__(self):
        return self.serialize()


def _as_values(p) -> Sequence[int]:
    return p.values if isinstance(p, Permutation) else p


# ---------------------------------------------------------------- containment


def _has_123(a) -> bool:
    # some middle element with a smaller value before it and a larger after it
    n = len(a)
    if n < 3:
        return False
    suffix_max = [0] * n
    m = float("-inf")
    for i in range(n - 1, -1, -1):
        suffix_max[i] = m
        m = max(m, a[i])
    lo = a[0]
    for i in range(1, n - 1):
        if lo < a[i] < suffix_max[i]:
            return True
        lo = min(lo, a[i])
    return False


def _has_132(a) -> bool:
    # scan right to left; `second` is the largest value seen so far that has a
    # larger value to its left among the scanned ones (a candidate "3 2" pair)
    second = float("-inf")
    stack = []
    for x in reversed(a):
        if x < second:
            return True
        while stack and stack[-1] < x:
            second = stack.pop()
        stack.append(x)
    return False


def contains(p, pat) -> bool:
    """True iff some subsequence of ``p`` is order-isomorphic to ``pat``."""
    a = list(_as_values(p))
    pat = Pattern.parse(pat)
    if pat is Pattern.P123:
        return _has_123(a)
    if pat is Pattern.P321:
        return _has_123([-x for x in a])
    if pat is Pattern.P132:
        return _has_132(a)
    if pat is Pattern.P231:
        return _has_132(a[::-1])
    if pat is Pattern.P312:
        return _has_132([-x for x in a])
    # 213 is the reverse of the complement of 132
    return _has_132([-x for x in reversed(a)])


def avoids(p, pat) -> bool:
    return not contains(p, pat)


def contains_bruteforce(p, pat) -> bool:
    """Cubic check over all index triples."""
    a = _as_values(p)
    w = Pattern.parse(pat).word
    for i, j, k in combinations(range(len(a)), 3):
        x, y, z = a[i], a[j], a[k]
        if ((x < y) == (w[0] < w[1]) and (y < z) == (w[1] < w[2])
                and (x < z) == (w[0] < w[2])):
            return True
    return False


# ---------------------------------------------------------------- enumeration


def _check_bound(n, bound):
    if n < 0:
        raise ValueError("n must be >= 0")
    if n > bound:
        raise ValueError(f"n={n} exceeds the exhaustive bound {bound}")


def enumerate_avoiders(n: int, pat, bound: int = EXHAUSTIVE_BOUND) -> Iterator[Permutation]:
    """Every pattern-avoiding permutation of [n], in lexicographic order.

    Depth-first over prefixes; a branch is cut as soon as its prefix contains
    the pattern, so the work is proportional to the number of avoiding
    prefixes rather than n!.
    """
    pat = Pattern.parse(pat)
    _check_bound(n, bound)
    prefix = []
    used = [False] * (n + 1)

    def extend_ok(v):
        # only triples ending at the new entry need checking
        w = pat.word
        m = len(prefix)
        for i in range(m):
            for j in range(i + 1, m):
                x, y = prefix[i], prefix[j]
                if ((x < y) == (w[0] < w[1]) and (y < v) == (w[1] < w[2])
                        and (x < v) == (w[0] < w[2])):
                    return False
        return True

    def rec():
        if len(prefix) == n:
            yield Permutation(tuple(prefix))
            return
        for v in range(1, n + 1):
            if not used[v] and extend_ok(v):
                used[v] = True
                prefix.append(v)
                yield from rec()
                prefix.pop()
                used[v] = False

    yield from rec()


def count_avoiders(n: int, pat, bound: int = EXHAUSTIVE_BOUND) -> int:
    return sum(1 for _ in enumerate_avoiders(n, pat, bound))


# ---------------------------------------------------------------- block structure


def first_irreducible_block(p) -> int:
    """Least j >= 1 such that the first j entries are the j smallest values of the block."""
    if isinstance(p, Permutation):
        vals, start = p.values, p.start
    else:
        vals = tuple(p)
        start = min(vals) if vals else 1
    if not vals:
        raise ValueError("empty permutation has no blocks")
    top = start - 1
    for k, v in enumerate(vals, 1):
        top = max(top, v)
        if top == start + k - 1:
            return k
    raise AssertionError("unreachable: full block always closes")


def is_block_irreducible(p) -> bool:
    """True iff no proper initial sub-block is mapped onto itself; singletons are irreducible."""
    return first_irreducible_block(p) == len(_as_values(p))


def count_birr_321(n: int, bound: int = EXHAUSTIVE_BOUND) -> int:
    if n < 1:
        raise ValueError("n must be >= 1")
    return sum(1 for p in enumerate_avoiders(n, Pattern.P321, bound) if is_block_irreducible(p))


def birr_class_counts(n: int, bound: int = EXHAUSTIVE_BOUND) -> dict:
    """Counts of 321-avoiders of [n] keyed by their first irreducible block length."""
    out = {j: 0 for j in range(1, n + 1)}
    for p in enumerate_avoiders(n, Pattern.P321, bound):
        out[first_irreducible_block(p)] += 1
    return out
