"""Exact and Monte Carlo checks of positional laws, coordinate convergence,
escape to infinity, and the stable limit of T_n^X / n^2."""

from __future__ import annotations

import cmath
import math
from collections import Counter
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np
from scipy import stats

from .catalan import (catalan, nu_limit, nu_n, pmf_X, sample_X, sample_X_array,
                      sample_X_inversion, split_weights)
from .limits import INF, limit_prefix, limit_prefix_213, limit_prefix_321_partial
from .parallel import map_chunks
from .patterns import (ALL_PATTERNS, EXHAUSTIVE_BOUND, Pattern, birr_class_counts,
                       contains, enumerate_avoiders, is_block_irreducible)
from .rng import RngStream
from .samplers import GT, avoider_prefix, sample_avoider

GT_CAP = "gt-cap"
INF_LABEL = "inf"
PAIR = "pair"


def bucket(v, cap: int):
    if v is INF:
        return INF_LABEL
    if v is GT or v > cap:
        return GT_CAP
    return v


@dataclass(frozen=True)
class EmpiricalDist:
    """Probability vector over the labels 1..cap, "gt-cap", "inf"."""

    labels: tuple
    masses: tuple
    trials: int

    def __post_init__(self):
        if self.trials < 1:
            raise ValueError("trials must be >= 1")
        if len(self.labels) != len(self.masses):
            raise ValueError("labels and masses differ in length")
        if abs(float(sum(self.masses)) - 1.0) > 1e-12:
            raise ValueError("masses do not sum to 1")

    @property
    def cap(self) -> int:
        return len(self.labels) - 2

    @staticmethod
    def make_labels(cap: int) -> tuple:
        return tuple(range(1, cap + 1)) + (GT_CAP, INF_LABEL)

    @classmethod
    def from_counts(cls, cap: int, counts, trials: int) -> "EmpiricalDist":
        labels = cls.make_labels(cap)
        return cls(labels, tuple(counts.get(lab, 0) / trials for lab in labels), trials)

    @classmethod
    def from_masses(cls, cap: int, masses: dict, trials: int = 1) -> "EmpiricalDist":
        labels = cls.make_labels(cap)
        return cls(labels, tuple(masses.get(lab, 0) for lab in labels), trials)

    def mass(self, label) -> float:
        return self.masses[self.labels.index(label)]

    def merged(self) -> tuple:
        """Masses with "gt-cap" and "inf" combined into one far bucket."""
        return self.masses[:-2] + (self.masses[-2] + self.masses[-1],)

    def to_dict(self) -> dict:
        return {"labels": [str(x) for x in self.labels],
                "masses": [float(m) for m in self.masses], "trials": self.trials}


def tv_distance(p: EmpiricalDist, q: EmpiricalDist):
    """Half the L1 distance, with "gt-cap" and "inf" merged on both sides."""
    if p.labels != q.labels:
        raise ValueError("bucketings differ")
    return sum(abs(a - b) for a, b in zip(p.merged(), q.merged())) / 2


@dataclass(frozen=True)
class CFPoint:
    t: float
    empirical: complex
    reference: complex
    abs_error: float


# ---------------------------------------------------------------- coordinate laws


def _far(v, cap):
    b = bucket(v, cap)
    return GT_CAP if b == INF_LABEL else b


def _count_prefix(c, pre, cap):
    for i, v in enumerate(pre, 1):
        c[i, bucket(v, cap)] += 1
    if len(pre) >= 2:
        c[PAIR, (_far(pre[0], cap), _far(pre[1], cap))] += 1


def _finite_chunk(rng, count, pat, n, m, cap):
    c = Counter()
    for _ in range(count):
        _count_prefix(c, avoider_prefix(n, pat, m, rng, cap=cap), cap)
    return c


def _limit_chunk(rng, count, kind, m, cap, options):
    c = Counter()
    for t in range(count):
        _count_prefix(c, limit_prefix(kind, m, rng.child(t), **options).entries, cap)
    return c


def _pair_law(total: Counter, trials: int) -> dict:
    return {lab: k / trials for (j, lab), k in total.items() if j == PAIR}


def joint_tv(p: dict, q: dict) -> float:
    """TV distance between two laws of (sigma_1, sigma_2) given as label -> mass."""
    return sum(abs(p.get(k, 0) - q.get(k, 0)) for k in set(p) | set(q)) / 2


def _split_counts(total: Counter, i_list, cap, trials):
    out = {}
    for i in i_list:
        sub = {lab: k for (j, lab), k in total.items() if j == i}
        out[i] = EmpiricalDist.from_counts(cap, sub, trials)
    return out


def empirical_coordinate_pmfs(pat, n: int, i_list, cap: int, trials: int, rng: RngStream,
                              jobs: int = 1, exact: bool = False) -> dict:
    """Laws of several coordinates sigma_i under the uniform measure on S_n(pat), from shared samples."""
    pat = Pattern.parse(pat)
    i_list = sorted(set(i_list))
    if not i_list or i_list[0] < 1 or i_list[-1] > n:
        raise ValueError("coordinates must lie in [1, n]")
    if exact:
        total = Counter()
        count = 0
        for p in enumerate_avoiders(n, pat):
            count += 1
            for i in i_list:
                total[i, bucket(p[i - 1], cap)] += 1
            if n >= 2:
                total[PAIR, (_far(p[0], cap), _far(p[1], cap))] += 1
        out = {i: EmpiricalDist.from_masses(
            cap, {lab: Fraction(k, count) for (j, lab), k in total.items() if j == i}, count)
            for i in i_list}
        out[PAIR] = {lab: Fraction(k, count) for (j, lab), k in total.items() if j == PAIR}
        return out
    total = Counter()
    m = max(i_list[-1], min(2, n))
    for c in map_chunks(_finite_chunk, trials, rng, jobs, args=(pat, n, m, cap)):
        total.update(c)
    out = _split_counts(total, i_list, cap, trials)
    out[PAIR] = _pair_law(total, trials)
    return out


def empirical_coordinate_pmf(pat, n: int, i: int, cap: int, trials: int, rng: RngStream,
                             jobs: int = 1, exact: bool = False) -> EmpiricalDist:
    if not 1 <= i <= n:
        raise ValueError(f"coordinate {i} outside [1, {n}]")
    return empirical_coordinate_pmfs(pat, n, [i], cap, trials, rng, jobs, exact)[i]


def coordinate_pmfs_limit(kind, i_list, cap: int, trials: int, rng: RngStream,
                          jobs: int = 1, **options) -> dict:
    kind = str(Pattern.parse(kind)) if str(kind) in ("312", "231", "213") else str(kind)
    if kind not in ("312", "231", "213"):
        raise ValueError("coordinate laws of the limit exist for 312, 231 and 213")
    i_list = sorted(set(i_list))
    if not i_list or i_list[0] < 1:
        raise ValueError("coordinates must be >= 1")
    total = Counter()
    m = max(i_list[-1], 2)
    for c in map_chunks(_limit_chunk, trials, rng, jobs, args=(kind, m, cap, options)):
        total.update(c)
    out = _split_counts(total, i_list, cap, trials)
    out[PAIR] = _pair_law(total, trials)
    return out


def coordinate_pmf_limit(pat, i: int, cap: int, trials: int, rng: RngStream,
                         jobs: int = 1, **options) -> EmpiricalDist:
    return coordinate_pmfs_limit(pat, [i], cap, trials, rng, jobs, **options)[i]


# ---------------------------------------------------------------- positional law


@dataclass
class PositionalResult:
    n: int
    pattern: str
    mode: str
    law: tuple
    reference: tuple
    max_error: float
    trials: int
    max_z: float = 0.0


def _pivot_value(pat, n):
    return 1 if pat in (Pattern.P312, Pattern.P213) else n


def _positional_chunk(rng, count, pat, n):
    c = Counter()
    target = _pivot_value(pat, n)
    for _ in range(count):
        c[sample_avoider(n, pat, rng).values.index(target) + 1] += 1
    return c


def positional_law(n: int, pat, exact: bool = True, trials: int = 0, rng: RngStream | None = None,
                   jobs: int = 1, bound: int = EXHAUSTIVE_BOUND) -> PositionalResult:
    """Law of the position of value 1 (312, 213) or value n (231, 132) against the split law."""
    pat = Pattern.parse(pat)
    if pat not in (Pattern.P312, Pattern.P213, Pattern.P231, Pattern.P132):
        raise ValueError("positional law covers 312, 213, 231 and 132")
    ref = split_weights(n).weights
    if exact:
        c = Counter()
        total = 0
        target = _pivot_value(pat, n)
        for p in enumerate_avoiders(n, pat, bound):
            c[p.values.index(target) + 1] += 1
            total += 1
        law = tuple(Fraction(c[j], total) for j in range(1, n + 1))
        err = max(abs(a - b) for a, b in zip(law, ref))
        return PositionalResult(n, str(pat), "exact", law, ref, err, total)
    if rng is None or trials < 1:
        raise ValueError("Monte Carlo mode needs trials and rng")
    c = Counter()
    for part in map_chunks(_positional_chunk, trials, rng, jobs, args=(pat, n)):
        c.update(part)
    law = tuple(c[j] / trials for j in range(1, n + 1))
    err = max(abs(a - float(b)) for a, b in zip(law, ref))
    zs = [abs(a - float(b)) / math.sqrt(float(b) * (1 - float(b)) / trials) if 0 < b < 1 else 0.0
          for a, b in zip(law, ref)]
    return PositionalResult(n, str(pat), "monte-carlo", law, ref, err, trials, max(zs))


def check_positional_law(n: int, pat, exact: bool = True, trials: int = 0,
                         rng: RngStream | None = None, jobs: int = 1):
    """Largest absolute deviation of the pivot position law from the split law."""
    return positional_law(n, pat, exact, trials, rng, jobs).max_error


# ---------------------------------------------------------------- escape to infinity


@dataclass
class EscapeRow:
    n: int
    probability: float
    trials: int
    mode: str


def _escape_chunk(rng, count, pat, n, j, L):
    hits = 0
    for _ in range(count):
        v = avoider_prefix(n, pat, j, rng, cap=L)[j - 1]
        if v is not GT:
            hits += 1
    return hits


def escape_scan(pat, j: int, L: int, n_grid, trials: int, rng: RngStream, jobs: int = 1,
                exact_upto: int = 8) -> list:
    """P(sigma_j <= L) for each n; exact by enumeration when n <= ``exact_upto``.

    Every n draws from the same chunk streams (common random numbers).
    """
    pat = Pattern.parse(pat)
    if pat not in (Pattern.P123, Pattern.P132):
        raise ValueError("escape scan covers 123 and 132")
    n_grid = list(n_grid)
    if j < 1 or j > min(n_grid):
        raise ValueError("need 1 <= j <= min(n_grid)")
    if L < 1:
        raise ValueError("need L >= 1")
    rows = []
    for n in n_grid:
        if n <= exact_upto:
            hits = total = 0
            for p in enumerate_avoiders(n, pat):
                total += 1
                hits += p[j - 1] <= L
            rows.append(EscapeRow(n, Fraction(hits, total), total, "exact"))
        else:
            hits = sum(map_chunks(_escape_chunk, trials, rng, jobs, args=(pat, n, j, L)))
            rows.append(EscapeRow(n, hits / trials, trials, "monte-carlo"))
    return rows


# ---------------------------------------------------------------- stable limit


def stable_reference(t: float) -> complex:
    """exp(-(sqrt(2)/2) |t|^(1/2) (1 + i sgn t))."""
    s = (t > 0) - (t < 0)
    return cmath.exp(-(math.sqrt(2) / 2) * math.sqrt(abs(t)) * complex(1, s))


def _stable_chunk(rng, count, n, ts, method):
    if method == "vector":
        tot = sample_X_array(rng.generator, (count, n)).sum(axis=1)
    else:
        draw = sample_X if method == "walk" else sample_X_inversion
        tot = np.array([float(sum(draw(rng) for _ in range(n))) for _ in range(count)])
    z = tot / (float(n) * n)
    return [complex(np.exp(-1j * t * z).sum()) for t in ts]


def stable_cf_check(n: int, trials: int, t_list, rng: RngStream, jobs: int = 1,
                    method: str = "vector") -> list:
    """Empirical E exp(-i t T_n^X / n^2) against the one-sided stable(1/2) transform.

    ``method`` picks the X sampler: "vector" (double-precision inverse
    survival, numpy), "inversion" (exact CDF walk) or "walk" (first return of
    a simple random walk; cost grows like n^2 per trial).
    """
    if n < 1 or trials < 1:
        raise ValueError("need n >= 1 and trials >= 1")
    if method not in ("vector", "inversion", "walk"):
        raise ValueError(f"unknown method {method!r}")
    ts = [float(t) for t in t_list]
    size = max(1, (1 << 21) // n)
    acc = [0j] * len(ts)
    for part in map_chunks(_stable_chunk, trials, rng, jobs, size=size, args=(n, ts, method)):
        acc = [a + b for a, b in zip(acc, part)]
    out = []
    for t, s in zip(ts, acc):
        emp = s / trials
        ref = stable_reference(t)
        out.append(CFPoint(t, emp, ref, abs(emp - ref)))
    return out


# ---------------------------------------------------------------- convergence


@dataclass
class ConvergenceReport:
    pattern: str
    cap: int
    trials: int
    rows: list = field(default_factory=list)     # (i, n, tv)
    limit: dict = field(default_factory=dict)    # i -> EmpiricalDist
    finite: dict = field(default_factory=dict)   # (i, n) -> EmpiricalDist
    joint: list = field(default_factory=list)    # (n, tv) for the pair (sigma_1, sigma_2)

    def series(self, i: int) -> list:
        return [tv for (j, n, tv) in self.rows if j == i]


def convergence_report(pat, i_list, cap: int, n_grid, trials: int, rng: RngStream,
                       jobs: int = 1, **options) -> ConvergenceReport:
    """TV distance between coordinate laws at each n and those of the limit object.

    The joint law of the first two entries, with "gt-cap" and "inf" merged,
    is compared as well and reported in ``joint``.  All n share the finite-side chunk streams, and the limit side is sampled
    once, so differences along the grid are not swamped by independent noise.
    """
    pat = Pattern.parse(pat)
    limit = coordinate_pmfs_limit(str(pat), i_list, cap, trials, rng.child("limit"), jobs, **options)
    rep = ConvergenceReport(str(pat), cap, trials, limit=limit)
    for n in n_grid:
        fin = empirical_coordinate_pmfs(pat, n, i_list, cap, trials, rng.child("finite"), jobs)
        for i in sorted(set(i_list)):
            rep.finite[i, n] = fin[i]
            rep.rows.append((i, n, float(tv_distance(fin[i], limit[i]))))
        if n >= 2:
            rep.joint.append((n, float(joint_tv(fin[PAIR], limit[PAIR]))))
    return rep


def nonincreasing(values, allowance: float = 0.0) -> bool:
    return all(b <= a + allowance for a, b in zip(values, values[1:]))


# ---------------------------------------------------------------- uniformity and counts


@dataclass
class UniformityResult:
    pattern: str
    n: int
    draws: int
    classes: int
    chi2: float
    critical: float
    avoidance_failures: int
    unknown: int

    @property
    def passed(self) -> bool:
        return self.avoidance_failures == 0 and self.unknown == 0 and self.chi2 <= self.critical


def _uniform_chunk(rng, count, pat, n):
    c = Counter()
    bad = 0
    for _ in range(count):
        p = sample_avoider(n, pat, rng)
        if contains(p.values, pat):
            bad += 1
        c[p.values] += 1
    return c, bad


def uniformity(pat, n: int, draws: int, rng: RngStream, jobs: int = 1,
               level: float = 0.999) -> UniformityResult:
    """Chi-square of sampler frequencies over the enumerated class; every sample is checked for avoidance."""
    pat = Pattern.parse(pat)
    support = [p.values for p in enumerate_avoiders(n, pat)]
    counts = Counter()
    bad = 0
    for c, b in map_chunks(_uniform_chunk, draws, rng, jobs, args=(pat, n)):
        counts.update(c)
        bad += b
    known = set(support)
    unknown = sum(k for v, k in counts.items() if v not in known)
    e = draws / len(support)
    chi2 = sum((counts.get(v, 0) - e) ** 2 / e for v in support)
    dof = len(support) - 1
    crit = float(stats.chi2.ppf(level, dof)) if dof > 0 else 0.0
    return UniformityResult(str(pat), n, draws, len(support), float(chi2), crit, bad, unknown)


def avoider_counts(max_n: int, patterns=ALL_PATTERNS) -> list:
    """(pattern, n, count, C_n) for every pattern and n <= max_n."""
    rows = []
    for pat in patterns:
        for n in range(max_n + 1):
            rows.append((str(pat), n, sum(1 for _ in enumerate_avoiders(n, pat)), catalan(n)))
    return rows


def birr_counts(max_n: int) -> list:
    """(n, j, count with first irreducible block j, C_{j-1} C_{n-j}) plus totals per n."""
    rows = []
    for n in range(1, max_n + 1):
        for j, k in birr_class_counts(n).items():
            rows.append((n, j, k, catalan(j - 1) * catalan(n - j)))
    return rows


def nu_gaps(n_grid, j_max: int = 10) -> list:
    """Exact |nu_n(j) - nu(j)| for each n and j <= j_max."""
    return [(n, j, abs(nu_n(n, j) - nu_limit(j))) for n in n_grid for j in range(1, j_max + 1)]


# ---------------------------------------------------------------- regenerative segments


@dataclass
class SegmentLawResult:
    """Segment-length frequencies against their law, plus structural violations."""

    trials: int
    segments: int
    length: EmpiricalDist
    reference: EmpiricalDist
    tv: float
    checked: int
    violations: int


def _length_result(trials, counts, cap, pmf, checked, violations):
    segments = sum(counts.values())
    emp = EmpiricalDist.from_counts(cap, counts, segments)
    masses = {k: pmf(k) for k in range(1, cap + 1)}
    masses[GT_CAP] = 1 - sum(masses.values())
    ref = EmpiricalDist.from_masses(cap, masses)
    return SegmentLawResult(trials, segments, emp, ref, tv_distance(emp, ref), checked, violations)


def _runs_chunk(rng, count, m, cap):
    c = Counter()
    bad = 0
    for t in range(count):
        pre = limit_prefix_213(m, rng.child(t))
        fin = pre.finite
        bad += any(b <= a for a, b in zip(fin, fin[1:]))
        for seg in pre.trace.segments:
            if seg.kind == "infinity-run":
                c[bucket(seg.run_length + 1, cap + 1)] += 1
    return c, bad


def infinity_runs_213(trials: int, m: int, rng: RngStream, jobs: int = 1,
                      cap: int = 10) -> SegmentLawResult:
    """Infinity-run lengths of 213 limit prefixes against the X law over {0..cap, >cap}.

    Lengths are shifted by one internally so that 0 gets its own bucket.
    Prefixes whose finite entries fail to increase count as violations.
    """
    counts = Counter()
    bad = 0
    for c, b in map_chunks(_runs_chunk, trials, rng, jobs, args=(m, cap)):
        counts.update(c)
        bad += b
    return _length_result(trials, counts, cap + 1, lambda k: pmf_X(k - 1), trials, bad)


def _blocks_chunk(rng, count, max_len, cap):
    c = Counter()
    checked = bad = 0
    for t in range(count):
        pre = limit_prefix_321_partial(rng.child(t), max_len=max_len)
        segs = pre.trace.segments
        y = segs[-1].draws["Y"]
        if y == 1 and (pre.entries or len(segs) != 1):
            bad += 1
        pos = 0
        for seg in segs[:-1]:
            c[bucket(seg.draws["hatX"], cap)] += 1
            vals = pre.entries[pos:pos + seg.materialized]
            pos += seg.materialized
            if seg.draws["method"] == "rejection":
                checked += 1
                a = seg.block[0]
                p = [v - a + 1 for v in vals]
                if sorted(p) != list(range(1, len(p) + 1)) or contains(p, Pattern.P321) \
                        or not is_block_irreducible(p):
                    bad += 1
    return c, checked, bad


def partial_321_blocks(trials: int, rng: RngStream, jobs: int = 1, max_len: int = 30,
                       cap: int = 10) -> SegmentLawResult:
    """Block lengths of 321 partial prefixes against the hat-X law over {1..cap, >cap}.

    Every block filled in completely is checked for irreducibility and
    321-avoidance; a draw with Y = 1 must give an empty prefix.
    """
    counts = Counter()
    checked = bad = 0
    for c, k, b in map_chunks(_blocks_chunk, trials, rng, jobs, args=(max_len, cap)):
        counts.update(c)
        checked += k
        bad += b
    return _length_result(trials, counts, cap, lambda k: pmf_X(k - 1), checked, bad)
