"""Exact uniform samplers for the six avoidance classes of S_3.

Patterns 312, 213, 231 and 132 decompose around the position of their
smallest (312, 213) or largest (231, 132) value; that position follows the
split law and the two sides are independent uniform avoiders of blocks of
values determined by the pattern.  The samplers below unfold this recursion
lazily, left to right, so a prefix of a huge permutation costs only the
splits that touch it.

Patterns 321 and 123 go through uniform Dyck paths.  A path is mapped to a
321-avoider by reading its peaks: a peak whose up step is the a-th up step and
whose following down step is the b-th down step places value a at position b
when a > b; the remaining positions take the remaining values in increasing
order.  Positions 1..k are fixed once the k-th down step has been read.
"""

from __future__ import annotations

from .catalan import sample_split_position
from .patterns import Pattern, Permutation, first_irreducible_block
from .rng import RngStream


class _Above:
    """Sentinel for an entry known to exceed the cap."""

    __slots__ = ()

    def __repr__(self):
        return "GT"


GT = _Above()

# pattern -> (pivot is the block minimum, values left of the pivot are the smaller ones)
_SPLIT_RULES = {
    Pattern.P312: (True, True),
    Pattern.P213: (True, False),
    Pattern.P231: (False, True),
    Pattern.P132: (False, False),
}


def _split_prefix(n, pat, k, rng, cap=None, offset=0):
    pivot_min, left_smaller = _SPLIT_RULES[pat]
    out = []
    # blocks (length, smallest value) in reverse position order
    stack = [(n, offset + 1)]
    while stack and len(out) < k:
        size, vmin = stack.pop()
        if size == 0:
            continue
        if cap is not None and vmin > cap:
            out.extend([GT] * min(size, k - len(out)))
            continue
        if size == 1:
            out.append(vmin)
            continue
        j = sample_split_position(size, rng)
        left, right = j - 1, size - j
        if pivot_min:
            pivot, lo = vmin, vmin + 1
        else:
            pivot, lo = vmin + size - 1, vmin
        if left_smaller:
            lmin, rmin = lo, lo + left
        else:
            rmin, lmin = lo, lo + right
        stack.append((right, rmin))
        stack.append((1, pivot))
        stack.append((left, lmin))
    return out


class DyckWalk:
    """A uniform Dyck path of semilength n, drawn one step at a time.

    From height h with r steps to go, the next step is up with probability
    (h+2)(r-h) / (2r(h+1)), the exact ratio of ballot counts.  With
    ``primitive`` the path is U + (uniform Dyck path of semilength n-1) + D,
    which touches zero only at its ends.
    """

    def __init__(self, n: int, rng: RngStream, primitive: bool = False):
        if n < 0 or (primitive and n < 1):
            raise ValueError("bad semilength")
        self.rng = rng
        self.n = n
        self.primitive = primitive
        self.pos = 0
        # inner walk state
        self._h = 0
        self._r = 2 * (n - 1) if primitive else 2 * n

    @property
    def length(self):
        return 2 * self.n

    def step(self) -> int:
        """Next step: +1 (up) or -1 (down)."""
        if self.pos >= self.length:
            raise StopIteration
        self.pos += 1
        if self.primitive and self.pos == 1:
            return 1
        if self.primitive and self.pos == self.length:
            return -1
        h, r = self._h, self._r
        if h == 0:
            up = True
        elif h == r:
            up = False
        else:
            up = self.rng.bernoulli((h + 2) * (r - h), 2 * r * (h + 1))
        self._h += 1 if up else -1
        self._r -= 1
        return 1 if up else -1


def _peak_prefix(walk: DyckWalk, k: int):
    """First k values of the 321-avoider attached to the path."""
    n = walk.n
    k = min(k, n)
    placed = {}
    ups = downs = 0
    prev = 0
    while downs < k:
        s = walk.step()
        if s == 1:
            ups += 1
        else:
            downs += 1
            if prev == 1 and ups > downs:
                placed[downs] = ups
        prev = s
    taken = set(placed.values())
    out = []
    v = 1
    for pos in range(1, k + 1):
        if pos in placed:
            out.append(placed[pos])
        else:
            while v in taken:
                v += 1
            out.append(v)
            v += 1
    return out


def _dyck_to_321(steps) -> tuple:
    """Map a complete Dyck path (sequence of +1/-1) to its 321-avoider."""
    n = len(steps) // 2
    walk = _ListWalk(steps)
    return tuple(_peak_prefix(walk, n))


class _ListWalk:
    def __init__(self, steps):
        self.steps = list(steps)
        self.n = len(self.steps) // 2
        self.pos = 0

    def step(self):
        s = self.steps[self.pos]
        self.pos += 1
        return s


def avoider_prefix(n: int, pat, k: int, rng: RngStream, cap: int | None = None,
                   offset: int = 0) -> list:
    """First k entries of a uniform pattern-avoiding permutation of [offset+1, offset+n].

    Entries known to exceed ``cap`` are returned as ``GT`` without being
    resolved.  For the split patterns, ``avoider_prefix(n, pat, n, rng)``
    consumes randomness exactly as ``sample_avoider`` does.  The 123 prefix is
    the complement of a 321 prefix.
    """
    pat = Pattern.parse(pat)
    k = min(k, n)
    if k <= 0:
        return []
    if pat in _SPLIT_RULES:
        return _split_prefix(n, pat, k, rng, cap, offset)
    vals = _peak_prefix(DyckWalk(n, rng), k)
    if pat is Pattern.P123:
        vals = [n + 1 - v for v in vals]
    vals = [v + offset for v in vals]
    if cap is not None:
        vals = [GT if v > cap else v for v in vals]
    return vals


def sample_avoider(n: int, pat, rng: RngStream) -> Permutation:
    """Exactly uniform element of S_n(pat)."""
    if n < 0:
        raise ValueError("n must be >= 0")
    pat = Pattern.parse(pat)
    if n == 0:
        return Permutation(())
    if pat in _SPLIT_RULES:
        return Permutation(tuple(_split_prefix(n, pat, n, rng)))
    vals = _peak_prefix(DyckWalk(n, rng), n)
    if pat is Pattern.P123:
        vals = vals[::-1]
    return Permutation(tuple(vals))


def sample_avoider_image(block, pat, rng: RngStream) -> Permutation:
    """Uniform pattern-avoiding arrangement of the values a..b (empty when b = a-1)."""
    a, b = block
    if b < a - 1:
        raise ValueError(f"malformed block [{a},{b}]")
    p = sample_avoider(b - a + 1, pat, rng)
    return Permutation(tuple(v + a - 1 for v in p.values), a)


def sample_birr_321(n: int, rng: RngStream, offset: int = 0) -> Permutation:
    """Uniform block-irreducible 321-avoider of [offset+1, offset+n], by rejection."""
    if n < 1:
        raise ValueError("n must be >= 1")
    while True:
        p = sample_avoider(n, Pattern.P321, rng)
        if first_irreducible_block(p) == n:
            if offset:
                p = p.shifted(offset)
            return p


def birr_321_prefix(n: int, k: int, rng: RngStream, offset: int = 0) -> list:
    """First k entries of a uniform block-irreducible 321-avoider of size n.

    Irreducible avoiders correspond to primitive Dyck paths under the peak
    map, so a lazily drawn primitive path gives the prefix without building
    the whole block.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    return [v + offset for v in _peak_prefix(DyckWalk(n, rng, primitive=True), k)]
