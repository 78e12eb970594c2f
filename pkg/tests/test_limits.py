import json
from collections import Counter
from math import sqrt

import pytest

from permlimit.limits import (INF, LIMIT_KINDS, ExtPrefix, Segment, SegmentTrace, limit_prefix,
                              limit_prefix_213, limit_prefix_231, limit_prefix_312,
                              limit_prefix_321_partial, parse_entries, replay)
from permlimit.patterns import contains, is_block_irreducible
from permlimit.rng import RngStream
from permlimit.verify import infinity_runs_213, partial_321_blocks


def find(gen, cond, tries=5000):
    """First prefix (over seeds) whose trace satisfies ``cond``."""
    for s in range(tries):
        pre = gen(RngStream(s))
        if cond(pre.trace.segments):
            return pre
    raise AssertionError("no seed found")


def blocks(pre):
    """(segment, entries) pairs in order."""
    pos = 0
    for seg in pre.trace.segments:
        yield seg, pre.entries[pos:pos + seg.materialized]
        pos += seg.materialized


# -------------------------------------------------------------- 312


def test_312_empty_first_block():
    pre = find(lambda r: limit_prefix_312(5, r),
               lambda s: s[0].draws == {"Y": 1, "X": 0})
    assert pre.entries[0] == 1


def test_312_block_then_singleton():
    pre = find(lambda r: limit_prefix_312(5, r),
               lambda s: s[0].draws == {"Y": 2, "X": 2})
    assert sorted(pre.entries[:2]) == [3, 4]
    assert pre.entries[2] == 2


def test_312_image_is_uniform():
    c = Counter()
    for s in range(20000):
        pre = limit_prefix_312(3, RngStream(s))
        if pre.trace.segments[0].draws == {"Y": 1, "X": 2}:
            c[pre.entries[:2]] += 1
    assert set(c) == {(2, 3), (3, 2)}
    total = sum(c.values())
    assert abs(c[2, 3] - total / 2) < 4 * sqrt(total) / 2


@pytest.mark.parametrize("seed", range(200))
def test_312_invariants(seed):
    pre = limit_prefix_312(60, RngStream(seed))
    assert len(pre) == 60
    assert INF not in pre.entries
    assert len(set(pre.entries)) == 60 and min(pre.entries) >= 1
    last_block = None
    for seg, vals in blocks(pre):
        if seg.kind == "avoider-block":
            a, b = seg.block
            assert all(a <= v <= b for v in vals)
            assert not contains([v - a + 1 for v in vals], "312") or len(vals) < 3
            if len(vals) == b - a + 1:
                assert sorted(vals) == list(range(a, b + 1))
            last_block = seg
        elif seg.kind == "singleton":
            assert seg.value == last_block.block[0] - 1
    assert sum(s.length for s in pre.trace.segments) >= 60


# -------------------------------------------------------------- 231


def test_231_empty_first_block():
    pre = find(lambda r: limit_prefix_231(4, r), lambda s: s[0].draws == {"X": 0})
    assert pre.entries[0] is INF


def test_231_first_block_of_three():
    pre = find(lambda r: limit_prefix_231(6, r), lambda s: s[0].draws == {"X": 3})
    assert sorted(pre.entries[:3]) == [1, 2, 3]
    assert not contains(pre.entries[:3], "231")
    assert pre.entries[3] is INF


@pytest.mark.parametrize("seed", range(200))
def test_231_invariants(seed):
    pre = limit_prefix_231(60, RngStream(seed))
    assert len(pre) == 60
    covered = []
    for seg, vals in blocks(pre):
        if seg.kind == "avoider-block":
            assert not contains(vals, "231")
            if len(vals) == seg.length:
                covered.extend(vals)
        else:
            assert seg.kind == "infinity-run" and seg.run_length == 1
            assert all(v is INF for v in vals)
    assert sorted(covered) == list(range(1, len(covered) + 1))
    assert len(set(pre.finite)) == len(pre.finite)


# -------------------------------------------------------------- 213


def test_213_first_interval():
    pre = find(lambda r: limit_prefix_213(40, r),
               lambda s: s[0].draws == {"X": 0} and s[1].draws.get("Y1") == 2
               and s[1].block[0] == 1)
    assert pre.trace.options["chi"] == 1
    assert pre.finite[:2] == [1, 2]


def test_213_adjacent_singletons():
    pre = find(lambda r: limit_prefix_213(4, r),
               lambda s: s[0].draws == {"X": 0} and s[2].draws == {"X": 0})
    assert pre.entries[0] is not INF and pre.entries[1] is not INF


def test_213_chi_zero_starts_after_a_gap():
    for s in range(300):
        pre = limit_prefix_213(40, RngStream(s))
        first = next(seg for seg in pre.trace.segments if seg.kind == "singleton")
        if pre.trace.options["chi"] == 1:
            assert first.value == 1
        else:
            assert first.value == 1 + sum(first.draws["hatX"]) >= 1 + first.draws["Y0"]


@pytest.mark.parametrize("seed", range(200))
def test_213_invariants(seed):
    pre = limit_prefix_213(80, RngStream(seed))
    fin = pre.finite
    assert all(a < b for a, b in zip(fin, fin[1:]))
    for seg, vals in blocks(pre):
        if seg.kind == "singleton":
            lo, hi = seg.block
            assert lo <= seg.value <= hi
        else:
            assert seg.run_length == seg.draws["X"]


def test_213_independent_reading():
    pre = limit_prefix_213(50, RngStream(3), y2_reading="independent")
    assert pre.trace.options["y2_reading"] == "independent"
    assert any("Y2" in s.draws for s in pre.trace.segments)
    assert replay(pre.trace).entries == pre.entries
    with pytest.raises(ValueError):
        limit_prefix_213(5, RngStream(3), y2_reading="y3")


@pytest.mark.slow
def test_213_run_lengths_follow_x_law():
    res = infinity_runs_213(70000, 200, RngStream(17))
    assert res.segments >= 10 ** 6
    assert res.violations == 0
    assert res.tv <= 0.01


# -------------------------------------------------------------- 321 partial


def test_321_partial_y1_is_empty():
    pre = find(limit_prefix_321_partial, lambda s: s[-1].draws["Y"] == 1)
    assert pre.entries == ()
    assert [s.kind for s in pre.trace.segments] == ["tail-marker"]


def test_321_partial_single_unit_block():
    pre = find(limit_prefix_321_partial,
               lambda s: s[-1].draws["Y"] == 2 and s[0].draws["hatX"] == 1)
    assert pre.entries == (1,)
    assert pre.trace.segments[-1].kind == "tail-marker"


def test_321_partial_two_pairs():
    pre = find(limit_prefix_321_partial,
               lambda s: s[-1].draws["Y"] == 3 and [x.draws["hatX"] for x in s[:2]] == [2, 2],
               tries=20000)
    assert pre.entries == (2, 1, 4, 3)


@pytest.mark.parametrize("seed", range(300))
def test_321_partial_blocks(seed):
    pre = limit_prefix_321_partial(RngStream(seed), max_len=200)
    segs = pre.trace.segments
    assert segs[-1].kind == "tail-marker"
    assert len(segs) - 1 == segs[-1].draws["Y"] - 1
    assert segs[-1].draws["M"] == sum(s.length for s in segs[:-1])
    for seg, vals in blocks(pre):
        if seg.kind == "birr-block" and seg.draws["method"] == "rejection":
            a = seg.block[0]
            p = [v - a + 1 for v in vals]
            assert sorted(p) == list(range(1, seg.length + 1))
            assert is_block_irreducible(p) and not contains(p, "321")
    assert len(pre) <= 200


def test_321_partial_block_lengths():
    res = partial_321_blocks(20000, RngStream(5))
    assert res.violations == 0 and res.checked > 10000
    assert res.tv < 0.02


# -------------------------------------------------------------- shared


@pytest.mark.parametrize("kind", ["312", "231", "213"])
def test_truncation_and_zero_length(kind):
    assert limit_prefix(kind, 0, RngStream(1)).entries == ()
    for m in (1, 7, 33):
        assert len(limit_prefix(kind, m, RngStream(2))) == m
    with pytest.raises(ValueError):
        limit_prefix(kind, -1, RngStream(1))


@pytest.mark.parametrize("kind", LIMIT_KINDS)
def test_replay_and_json_round_trip(kind):
    for s in range(30):
        opts = {} if kind != "321-partial" else {"max_len": 40}
        m = 0 if kind == "321-partial" else 50
        pre = limit_prefix(kind, m, RngStream(s, 2, ("x",)), **opts)
        text = pre.trace.to_json()
        back = SegmentTrace.from_json(text)
        assert back.to_json() == text
        assert replay(back).entries == pre.entries


def test_replay_detects_tampering():
    pre = limit_prefix_312(40, RngStream(8))
    d = json.loads(pre.trace.to_json())
    d["seed"] = 9
    assert replay(SegmentTrace.from_dict(d)).entries != pre.entries


def test_trace_rejects_unknown_kinds():
    with pytest.raises(ValueError):
        SegmentTrace.from_dict({"generator": "123", "seed": 1, "key": [0]})
    with pytest.raises(ValueError):
        Segment.from_dict({"kind": "bogus"})


def test_line_format():
    pre = ExtPrefix((3, INF, 1), None)
    assert pre.serialize() == "3,inf,1"
    assert parse_entries("3,inf,1") == (3, INF, 1)
    assert parse_entries("") == ()
    assert str(INF) == "inf"


@pytest.mark.parametrize("seed", range(100))
def test_supports_are_disjoint(seed):
    a = limit_prefix_312(40, RngStream(seed))
    b = limit_prefix_231(40, RngStream(seed))
    c = limit_prefix_213(40, RngStream(seed))
    assert INF not in a.entries
    # an infinity follows every block that ends inside the prefix
    first = b.trace.segments[0]
    assert (INF in b.entries) == (first.length < 40)
    # a 312 prefix of length 40 always has a descent into its singleton
    assert any(y < x for x, y in zip(a.entries, a.entries[1:]))
    fin = c.finite
    assert all(x < y for x, y in zip(fin, fin[1:]))
