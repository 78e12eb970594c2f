import threading
from collections import Counter
from fractions import Fraction
from itertools import product
from math import comb, exp, lgamma, sqrt

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import stats

from permlimit.catalan import (HEAD_TERMS, CatalanTable, _split_folded, _split_tail,
                               _survival_float, _survival_inverse, catalan, nu_limit, nu_n,
                               nu_pmfs, pmf_X, sample_split_position, sample_X,
                               sample_X_array, sample_X_inversion, sample_Y, split_weights,
                               survival_X)
from permlimit.rng import RngStream


def binomial_catalan(n):
    return comb(2 * n, n) // (n + 1)


def test_catalan_examples():
    assert catalan(0) == 1
    assert catalan(5) == 42
    assert catalan(10) == 16796


def test_catalan_matches_binomial_and_recurrence():
    for n in range(0, 201):
        assert catalan(n) == binomial_catalan(n)
        if n:
            assert catalan(n) == sum(catalan(j - 1) * catalan(n - j) for j in range(1, n + 1))


def test_table_grows_concurrently():
    t = CatalanTable(size=2)
    out = []

    def grab(k):
        out.append((k, t[k]))

    threads = [threading.Thread(target=grab, args=(k,)) for k in range(300, 0, -7)]
    for th in threads:
        th.start()
    for th in threads:
        th.join()
    assert all(v == binomial_catalan(k) for k, v in out)
    assert len(t) > 300


def test_catalan_rejects_negative():
    with pytest.raises(ValueError):
        catalan(-1)


def test_split_weights_examples():
    assert split_weights(1).weights == (Fraction(1),)
    assert split_weights(3).weights == (Fraction(2, 5), Fraction(1, 5), Fraction(2, 5))
    assert split_weights(4).weights == (Fraction(5, 14), Fraction(1, 7), Fraction(1, 7), Fraction(5, 14))
    with pytest.raises(ValueError):
        split_weights(0)


@given(st.integers(1, 200))
@settings(max_examples=60, deadline=None)
def test_split_weights_sum_to_one_and_symmetric(n):
    w = split_weights(n).weights
    assert sum(w) == 1
    assert w == w[::-1]
    assert all(nu_n(n, j) == w[j - 1] for j in (1, n, (n + 1) // 2))


def test_split_position_rejects_zero():
    with pytest.raises(ValueError):
        sample_split_position(0, RngStream(0))


def test_split_position_n1():
    r = RngStream(0)
    assert {sample_split_position(1, r) for _ in range(50)} == {1}


def _folded_chi2(n, draws, seed):
    # buckets: j = 1..6, n-5..n, and everything else
    r = RngStream(seed)
    edge = list(range(1, 7)) + list(range(n - 5, n + 1))
    counts = Counter()
    for _ in range(draws):
        j = sample_split_position(n, r)
        counts[j if j in edge else 0] += 1
    probs = [float(nu_n(n, j)) for j in edge]
    probs.append(1 - sum(probs))
    obs = [counts[j] for j in edge] + [counts[0]]
    return stats.chisquare(obs, np.array(probs) * draws).pvalue


@pytest.mark.parametrize("n", [2, 3, 12, 40, 41, 1000, 8193, 50000])
def test_split_position_law(n):
    if n <= 12:
        r = RngStream(n)
        c = Counter(sample_split_position(n, r) for _ in range(60000))
        exp_ = [float(w) * 60000 for w in split_weights(n).weights]
        assert stats.chisquare([c[j] for j in range(1, n + 1)], exp_).pvalue > 1e-4
    else:
        assert _folded_chi2(n, 60000, n) > 1e-4


def test_split_fast_path_equals_exact_path():
    for n in (41, 64, 999, 8192, 8193, 30000):
        for s in range(400):
            a = sample_split_position(n, RngStream(s, 1))
            b = _split_folded(n, RngStream(s, 1))
            assert a == b


def _folded_pmf(n, k):
    # lgamma oracle, independent of the ratio recursion used by the sampler
    def lc(m):
        return lgamma(2 * m + 1) - lgamma(m + 1) - lgamma(m + 2)
    w = exp(lc(k - 1) + lc(n - k) - lc(n))
    return w if 2 * k == n + 1 else 2 * w


def test_split_tail_law():
    n = 200001
    r = RngStream(77)
    draws = [_split_tail(n, r) for _ in range(6000)]
    folded = [min(j, n + 1 - j) for j in draws]
    assert min(folded) > HEAD_TERMS
    # compare against the exact tail in log-spaced bins
    edges = [HEAD_TERMS + 1, 6000, 10000, 20000, 40000, 70000, (n + 1) // 2 + 1]
    ks = np.arange(HEAD_TERMS + 1, (n + 1) // 2 + 1)
    pmf = np.array([_folded_pmf(n, int(k)) for k in ks])
    pmf /= pmf.sum()
    expected = [pmf[(ks >= a) & (ks < b)].sum() * len(folded) for a, b in zip(edges, edges[1:])]
    observed = np.histogram(folded, bins=edges)[0]
    assert stats.chisquare(observed, expected).pvalue > 1e-4
    # sides are equally likely
    left = sum(1 for j in draws if j <= n // 2)
    assert abs(left - 3000) < 5 * sqrt(1500)


def test_split_tail_frequency_at_large_n():
    n = 10**6
    r = RngStream(5)
    draws = 100000
    far = sum(1 for _ in range(draws) if HEAD_TERMS < min(j := sample_split_position(n, r), n + 1 - j))
    p = 1 - sum(_folded_pmf(n, k) for k in range(1, HEAD_TERMS + 1))
    assert abs(far - p * draws) < 5 * sqrt(draws * p)


# ---------------------------------------------------------------- X


def first_return_law(max_j):
    # brute force over all +-1 paths of length 2j: first return to 0 at time 2j
    out = {}
    for j in range(1, max_j + 1):
        hits = 0
        for path in product((1, -1), repeat=2 * j):
            h = 0
            first = None
            for t, s in enumerate(path, 1):
                h += s
                if h == 0:
                    first = t
                    break
            hits += first == 2 * j
        out[j] = Fraction(hits, 4**j)
    return out


def test_X_pmf_matches_walk_enumeration():
    law = first_return_law(6)
    for j, p in law.items():
        assert pmf_X(j - 1) == p


def test_X_pmf_examples():
    assert pmf_X(0) == Fraction(1, 2)
    assert pmf_X(1) == Fraction(1, 8)
    # partial sums plus the tail are exactly 1
    for k in (1, 5, 40):
        assert sum(pmf_X(j) for j in range(k)) + survival_X(k) == 1
        assert survival_X(k) == Fraction(comb(2 * k, k), 4**k)


def test_walk_sampler_frequencies():
    r = RngStream(101)
    draws = 10**6
    c = Counter(sample_X(r, cap=5) for _ in range(draws))
    for k in range(6):
        p = float(pmf_X(k))
        assert abs(c[k] / draws - p) <= 4 * sqrt(p * (1 - p) / draws)


def test_walk_and_inversion_agree():
    draws = 10**6
    r1, r2 = RngStream(11, 1), RngStream(11, 2)
    a = Counter(sample_X(r1, cap=20) for _ in range(draws))
    b = Counter(sample_X_inversion(r2, cap=20) for _ in range(draws))
    keys = list(range(21)) + [None]
    tv = sum(abs(a[k] - b[k]) for k in keys) / (2 * draws)
    assert tv <= 0.005


def test_censoring_does_not_bias():
    r = RngStream(12)
    c = Counter(sample_X(r, cap=2) for _ in range(200000))
    assert set(c) <= {0, 1, 2, None}
    p = float(survival_X(3))
    assert abs(c[None] / 200000 - p) < 5 * sqrt(p * (1 - p) / 200000)


@given(st.floats(1e-15, 0.02))
@settings(max_examples=200, deadline=None)
def test_survival_inverse_brackets(v):
    k = _survival_inverse(v, 1025)
    assert _survival_float(k + 1) < v
    assert k == 1025 or _survival_float(k) >= v


def test_inversion_tail_frequency():
    r = RngStream(13)
    draws = 400000
    big = sum(1 for _ in range(draws) if sample_X_inversion(r) >= 5000)
    p = float(survival_X(5000))
    assert abs(big / draws - p) < 5 * sqrt(p / draws)


def test_vector_sampler_survival():
    x = sample_X_array(np.random.default_rng(3), 2 * 10**6)
    assert x.min() == 0
    for k in (1, 2, 3, 10, 127, 128, 129, 1000, 10**4, 10**6):
        p = float(survival_X(k)) if k < 10**5 else _survival_float(k)
        assert abs(np.mean(x >= k) - p) < 5 * sqrt(p * (1 - p) / x.size), k


def test_vector_sampler_shape():
    x = sample_X_array(np.random.default_rng(0), (3, 5))
    assert x.shape == (3, 5)
    assert np.all(x == np.floor(x))


def test_Y():
    r = RngStream(14)
    ys = [sample_Y(r) for _ in range(200000)]
    assert min(ys) == 1
    assert abs(np.mean(np.array(ys) == 1) - 0.5) < 5 * sqrt(0.25 / 200000)
    assert abs(np.mean(np.array(ys) == 3) - 0.125) < 5 * sqrt(0.125 * 0.875 / 200000)
    assert abs(np.mean(ys) - 2) < 5 * sqrt(2 / 200000)


# ---------------------------------------------------------------- nu


def test_nu_examples():
    pm = nu_pmfs(3, cap=3)
    assert pm.finite == (Fraction(2, 5), Fraction(1, 5), Fraction(2, 5))
    assert pm.limit == (Fraction(1, 4), Fraction(1, 16), Fraction(1, 32))
    assert pm.limit_inf == Fraction(1, 2)
    assert sum(pm.limit) + pm.limit_rest == Fraction(1, 2)
    with pytest.raises(ValueError):
        nu_pmfs(0)


def test_nu_finite_mass_tends_to_half():
    s = sum(nu_limit(j) for j in range(1, 400))
    assert Fraction(1, 2) - s < Fraction(1, 30)
    assert s < Fraction(1, 2)


def test_nu_n_converges_to_nu():
    gaps = {n: [abs(nu_n(n, j) - nu_limit(j)) for j in range(1, 11)] for n in (50, 500, 5000)}
    for j in range(10):
        assert gaps[50][j] > gaps[500][j] > gaps[5000][j]
    assert max(gaps[5000]) <= Fraction(1, 100)


def test_nu_n_log_space_oracle():
    for n, j in ((50, 3), (5000, 10), (123, 61)):
        lg = lambda m: lgamma(2 * m + 1) - lgamma(m + 1) - lgamma(m + 2)
        assert abs(float(nu_n(n, j)) - exp(lg(j - 1) + lg(n - j) - lg(n))) < 1e-10
