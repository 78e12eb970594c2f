"""Catalan numbers, the split law nu_n, its limit nu, and the variables X and Y.

All probabilities are exact ``Fraction`` values.  Samplers draw from an
``RngStream`` and are exact: inversion is done against a lazily refined
uniform, so no floating point enters the decision except in the far tails
noted on the individual functions.
"""

from __future__ import annotations

import threading
from bisect import bisect_right
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from math import floor, pi, sqrt

import numpy as np
from scipy.special import poch

from .rng import RngStream


class CatalanTable:
    """Growable cache of Catalan numbers, safe for concurrent readers and appenders."""

    def __init__(self, size: int = 64):
        self.values = [1]
        self._lock = threading.Lock()
        self.extend(size)

    def extend(self, n: int):
        if n < len(self.values):
            return
        with self._lock:
            vals = self.values
            while len(vals) <= n:
                k = len(vals) - 1
                # C_{k+1} = C_k * 2(2k+1) / (k+2)
                vals.append(vals[k] * 2 * (2 * k + 1) // (k + 2))

    def __getitem__(self, n: int) -> int:
        if n < 0:
            raise ValueError("Catalan index must be non-negative")
        if n >= len(self.values):
            self.extend(n)
        return self.values[n]

    def __len__(self):
        return len(self.values)


TABLE = CatalanTable()


def catalan(n: int) -> int:
    """The n-th Catalan number, exactly."""
    return TABLE[int(n)]


@dataclass(frozen=True)
class SplitLaw:
    n: int
    weights: tuple

    def __iter__(self):
        return iter(self.weights)

    def __len__(self):
        return len(self.weights)

    def __getitem__(self, j):
        return self.weights[j]


def split_weights(n: int) -> SplitLaw:
    """Exact law of the split position: w_j = C_{j-1} C_{n-j} / C_n for j = 1..n."""
    if n < 1:
        raise ValueError("split law needs n >= 1")
    cn = catalan(n)
    return SplitLaw(n, tuple(Fraction(catalan(j - 1) * catalan(n - j), cn)
                             for j in range(1, n + 1)))


# sizes up to this use an integer cumulative table and a single randbelow
_SMALL_SPLIT = 40
# number of folded terms handled by exact inversion before switching to the tail
HEAD_TERMS = 4096


@lru_cache(maxsize=None)
def _split_cumulative(n: int) -> tuple:
    acc = 0
    out = []
    for j in range(1, n + 1):
        acc += catalan(j - 1) * catalan(n - j)
        out.append(acc)
    return tuple(out)


def sample_split_position(n: int, rng: RngStream) -> int:
    """Draw j in [1, n] with probability C_{j-1} C_{n-j} / C_n.

    The draw inverts the cumulative law, visited in the order 1, n, 2, n-1, ...,
    against one uniform.  A double-precision table locates the answer; when
    the uniform falls within ``_MARGIN`` of a table boundary the decision is
    redone in exact integer arithmetic on the same uniform.
    """
    if n < 1:
        raise ValueError("split law needs n >= 1")
    if n == 1:
        return 1
    if n <= _SMALL_SPLIT:
        cum = _split_cumulative(n)
        return bisect_right(cum, rng.randbelow(cum[-1])) + 1
    u = rng.uniform()
    cum = _folded_cumulative(n)
    x = u.num * 2.0 ** -64
    i = int(np.searchsorted(cum, x, side="right"))
    lo_ok = i == 0 or x - cum[i - 1] > _MARGIN
    hi_ok = i == len(cum) or cum[i] - x > _MARGIN
    if not (lo_ok and hi_ok):
        return _split_folded(n, rng, u)
    if i == len(cum) and n > 2 * HEAD_TERMS:
        return _split_tail(n, rng)
    k = i // 2 + 1
    return k if i % 2 == 0 else n + 1 - k


# rounding in the float tables stays below 1e-12; the margin leaves room
_MARGIN = 1e-10


@lru_cache(maxsize=128)
def _folded_cumulative(n: int) -> np.ndarray:
    # interleaved weights nu_n(1), nu_n(n), nu_n(2), nu_n(n-1), ... by the ratio recursion
    m = min((n + 1) // 2, HEAD_TERMS)
    k = np.arange(1, m, dtype=np.float64)
    ratio = (2 * k - 1) * (n - k + 1) / ((k + 1) * (2 * n - 2 * k - 1))
    w = np.empty(m)
    w[0] = (n + 1) / (2.0 * (2 * n - 1))
    w[1:] = w[0] * np.cumprod(ratio)
    pairs = np.repeat(w, 2)
    if n % 2 == 1 and m == (n + 1) // 2:
        pairs = pairs[:-1]  # the middle position appears once
    cum = np.cumsum(pairs)
    if 2 * m >= n:
        cum = cum[:-1]  # the last boundary is 1; everything above it is the last position
    return cum


def _split_folded(n: int, rng: RngStream, u=None) -> int:
    # Term k has weight P/D; cumulative mass is A/D.  All integers, so the
    # comparison with the lazy uniform is exact.
    if u is None:
        u = rng.uniform()
    P = n + 1
    D = 2 * (2 * n - 1)
    A = 0
    k = 1
    while True:
        if 2 * k == n + 1:
            # middle position of an odd block; cumulative mass reaches 1 here
            return k
        A += P
        if u.less_than(A, D):
            return k
        A += P
        if 2 * k == n or u.less_than(A, D):
            return n + 1 - k
        if k >= HEAD_TERMS:
            return _split_tail(n, rng)
        num = (2 * k - 1) * (n - k + 1)
        den = (k + 1) * (2 * n - 2 * k - 1)
        P *= num
        A *= den
        D *= den
        k += 1


def _tail_ratio_sup(start: int) -> float:
    # sup over k >= start of 1 / (poch(k-1/2, 3/2) * d(k)); the function
    # decreases towards 2, so its value at the start is the supremum.
    return 1.01 * max(_tail_ratio(start), 2.0)


def _gap(k):
    # (k-1/2)^(-1/2) - (k+1/2)^(-1/2) without cancellation
    a = sqrt(k - 0.5)
    b = sqrt(k + 0.5)
    return 1.0 / (a * b * (a + b))


def _tail_ratio(k):
    return 1.0 / (poch(k - 0.5, 1.5) * _gap(k))


def _split_tail(n: int, rng: RngStream) -> int:
    """Folded position k > HEAD_TERMS, by rejection from a discretized Pareto(1/2).

    Only reached with probability about 0.009 for blocks above 8192.  The
    acceptance ratio is evaluated in double precision.
    """
    x0 = HEAD_TERMS + 0.5
    top = (n + 1) // 2
    lead = poch(n + 0.5, 1.5)
    rho_top = lead / poch(n - top + 0.5, 1.5)
    bound = 2.0 * rho_top * _tail_ratio_sup(HEAD_TERMS + 1) / (4.0 * sqrt(pi) * sqrt(x0))
    while True:
        v = 1.0 - rng.random()
        x = x0 / (v * v)
        if x >= top + 0.5:
            continue
        k = int(floor(x + 0.5))
        prop = sqrt(x0) * _gap(k)
        a = 1.0 / (4.0 * sqrt(pi) * poch(k - 0.5, 1.5))
        w = a * lead / poch(n - k + 0.5, 1.5)
        middle = 2 * k == n + 1
        if not middle:
            w *= 2.0
        if rng.random() * bound * prop < w:
            break
    if middle or rng.bit():
        return k
    return n + 1 - k


# ---------------------------------------------------------------- X and Y


def pmf_X(k: int) -> Fraction:
    """P(X = k) = C_k / (2 * 4^k)."""
    if k < 0:
        return Fraction(0)
    return Fraction(catalan(k), 2 * 4 ** k)


def survival_X(k: int) -> Fraction:
    """P(X >= k) = binom(2k, k) / 4^k."""
    if k <= 0:
        return Fraction(1)
    return Fraction((k + 1) * catalan(k), 4 ** k)


def sample_X(rng: RngStream, cap: int | None = None):
    """X by a simple symmetric random walk run until its first return to 0.

    The return time is 2(X + 1).  With ``cap`` set, the walk is stopped once
    it is known that X > cap and ``None`` is returned.
    """
    h = 1  # by symmetry the first step is taken upwards
    steps = 1
    limit = None if cap is None else 2 * (cap + 1)
    while h:
        if limit is not None and steps >= limit:
            return None
        h += 1 if rng.bit() else -1
        steps += 1
    return steps // 2 - 1


X_HEAD = 1024


def sample_X_inversion(rng: RngStream, cap: int | None = None):
    """X by inverting its CDF against one lazily refined uniform.

    F(k) = N_k / 2^(2k+1) with N_k = 4 N_{k-1} + C_k is dyadic, so the first
    ``X_HEAD`` values are decided exactly (a float table answers unless the
    uniform is within ``_MARGIN`` of a boundary).  Beyond that (probability
    about 0.018) the survival function is evaluated in double precision
    against a complement of the uniform carrying 60 relative bits.
    """
    u = rng.uniform()
    cdf = _cdf_table()
    x = u.num * 2.0 ** -64
    k = int(np.searchsorted(cdf, x, side="right"))
    lo_ok = k == 0 or x - cdf[k - 1] > _MARGIN
    hi_ok = k == len(cdf) or cdf[k] - x > _MARGIN
    if not (lo_ok and hi_ok):
        k = _x_head_exact(u)
    if k > X_HEAD:
        k = _survival_inverse(float(u.complement()), X_HEAD + 1)
    if cap is not None and k > cap:
        return None
    return k


@lru_cache(maxsize=1)
def _cdf_table():
    return np.array([float(1 - survival_X(k + 1)) for k in range(X_HEAD + 1)])


def _x_head_exact(u) -> int:
    num = 0
    for k in range(X_HEAD + 1):
        num = 4 * num + catalan(k)
        if u.less_than_dyadic(num, 2 * k + 1):
            return k
    return X_HEAD + 1


def _survival_float(k):
    # P(X >= k) = Gamma(k + 1/2) / (sqrt(pi) Gamma(k + 1))
    return 1.0 / (sqrt(pi) * poch(k + 0.5, 0.5))


def _survival_inverse(v: float, lo: int) -> int:
    """Least k >= lo with P(X >= k + 1) < v, assuming P(X >= lo) >= v."""
    # P(X >= k) ~ 1/sqrt(pi k), so the root is near 1/(pi v^2)
    hi = max(lo, int(1.0 / (pi * v * v)))
    while not _survival_float(hi + 1) < v:
        hi = 2 * hi + 1
    while lo < hi:
        mid = (lo + hi) // 2
        if _survival_float(mid + 1) < v:
            hi = mid
        else:
            lo = mid + 1
    return lo


_X_TABLE_LEN = 128


@lru_cache(maxsize=1)
def _survival_table():
    # s[k] = P(X >= k + 1) as floats, k = 0.._X_TABLE_LEN-1 (decreasing)
    return np.array([float(survival_X(k + 1)) for k in range(_X_TABLE_LEN)])


def sample_X_array(gen: np.random.Generator, size: int) -> np.ndarray:
    """Vectorized draws of X in double precision, for bulk Monte Carlo.

    Inverse survival function: X = min{k : P(X >= k+1) < V} with V uniform on
    (0, 1].  Small values come from a table, large ones from the asymptotic
    inverse refined with exact-in-double survival evaluations.
    """
    v = 1.0 - gen.random(size)
    surv = _survival_table()
    # surv is decreasing; count entries >= v
    out = np.searchsorted(-surv, -v, side="right").astype(np.float64)
    far = out >= _X_TABLE_LEN
    if np.any(far):
        vf = v[far]
        k = np.floor(1.0 / (pi * vf * vf))
        k = np.maximum(k, _X_TABLE_LEN)
        for _ in range(64):
            # want S(k+1) < v <= S(k)
            up = 1.0 / (sqrt(pi) * poch(k + 1.5, 0.5)) >= vf
            down = (k > _X_TABLE_LEN) & (1.0 / (sqrt(pi) * poch(k + 0.5, 0.5)) < vf)
            if not (up.any() or down.any()):
                break
            k = k + up - down
        out[far] = k
    return out


def sample_Y(rng: RngStream) -> int:
    """Geometric on {1, 2, ...} with P(Y = n) = 2^-n: count fair bits up to the first 1."""
    n = 1
    while not rng.bit():
        n += 1
    return n


def sample_hat_X(rng: RngStream) -> int:
    return sample_X_inversion(rng) + 1


# ---------------------------------------------------------------- nu_n and nu


@dataclass(frozen=True)
class NuPmfs:
    """nu_n on [1, n] and nu on {1..cap} plus the remaining finite and infinite mass."""

    n: int
    cap: int
    finite: tuple        # nu_n(j), j = 1..n
    limit: tuple         # nu(j), j = 1..cap
    limit_rest: Fraction  # nu(j > cap, j finite)
    limit_inf: Fraction   # nu(infinity)


def nu_limit(j: int) -> Fraction:
    """nu(j) = C_{j-1} 4^-j."""
    return Fraction(catalan(j - 1), 4 ** j)


def nu_pmfs(n: int, cap: int = 10) -> NuPmfs:
    if n < 1:
        raise ValueError("nu_n needs n >= 1")
    if cap < 1:
        raise ValueError("cap must be >= 1")
    lim = tuple(nu_limit(j) for j in range(1, cap + 1))
    half = Fraction(1, 2)
    return NuPmfs(n, cap, split_weights(n).weights, lim, half - sum(lim), half)


def nu_n(n: int, j: int) -> Fraction:
    """nu_n(j) = C_{j-1} C_{n-j} / C_n, without building the whole law."""
    if not 1 <= j <= n:
        return Fraction(0)
    return Fraction(catalan(j - 1) * catalan(n - j), catalan(n))
