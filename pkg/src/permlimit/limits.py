"""Finite prefixes of the regenerative limit objects, with segment traces.

Each generator reads its ingredient sequences (X, Y, hat-X, ...) from their own
child streams of the caller's ``RngStream`` and fills block contents from a
separate ``content`` stream.  The returned trace records the segment skeleton
(kinds, blocks, values, draws) so that ``replay`` can rebuild the identical
prefix from the skeleton and the content stream alone.

Blocks are materialized lazily: only the entries that fall inside the
requested prefix are drawn, which keeps heavy-tailed block sizes harmless.
Each segment records how many of its entries were materialized.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field

from .catalan import sample_hat_X, sample_X_inversion, sample_Y
from .patterns import Pattern
from .rng import RngStream
from .samplers import avoider_prefix, birr_321_prefix, sample_birr_321


class _Infinity:
    __slots__ = ()

    def __repr__(self):
        return "inf"

    __str__ = __repr__

    def __reduce__(self):
        return (_infinity, ())


def _infinity():
    return INF


INF = _Infinity()

LIMIT_KINDS = ("312", "231", "213", "321-partial")
SEGMENT_KINDS = ("avoider-block", "singleton", "infinity-run", "birr-block", "tail-marker")

# entries of a 321-partial prefix drawn before blocks stop being filled in
DEFAULT_MATERIALIZE = 100_000


@dataclass
class Segment:
    kind: str
    block: tuple | None = None
    value: int | None = None
    run_length: int | None = None
    draws: dict = field(default_factory=dict)
    materialized: int = 0

    @property
    def length(self) -> int:
        if self.kind in ("avoider-block", "birr-block"):
            return self.block[1] - self.block[0] + 1
        if self.kind == "singleton":
            return 1
        if self.kind == "infinity-run":
            return self.run_length
        return 0

    def to_dict(self) -> dict:
        d = {k: v for k, v in asdict(self).items() if v is not None}
        if self.block is not None:
            d["block"] = list(self.block)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "Segment":
        d = dict(d)
        if d["kind"] not in SEGMENT_KINDS:
            raise ValueError(f"unknown segment kind {d['kind']!r}")
        if "block" in d:
            d["block"] = tuple(d["block"])
        return cls(**d)


@dataclass
class SegmentTrace:
    generator: str
    seed: int
    key: tuple
    m: int | None
    options: dict = field(default_factory=dict)
    segments: list = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "generator": self.generator,
            "seed": self.seed,
            "key": list(self.key),
            "m": self.m,
            "options": self.options,
            "segments": [s.to_dict() for s in self.segments],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), separators=(",", ":"), sort_keys=True)

    @classmethod
    def from_dict(cls, d: dict) -> "SegmentTrace":
        if d.get("generator") not in LIMIT_KINDS:
            raise ValueError(f"unknown generator {d.get('generator')!r}")
        return cls(d["generator"], int(d["seed"]), tuple(d["key"]), d.get("m"),
                   dict(d.get("options", {})),
                   [Segment.from_dict(s) for s in d.get("segments", [])])

    @classmethod
    def from_json(cls, text: str) -> "SegmentTrace":
        return cls.from_dict(json.loads(text))

    def stream(self) -> RngStream:
        return RngStream(self.seed, self.key[0], self.key[1:])


@dataclass
class ExtPrefix:
    entries: tuple
    trace: SegmentTrace

    def __len__(self):
        return len(self.entries)

    def serialize(self) -> str:
        return ",".join(str(e) for e in self.entries)

    @property
    def finite(self) -> list:
        return [e for e in self.entries if e is not INF]


def parse_entries(text: str) -> tuple:
    text = text.strip()
    if not text:
        return ()
    return tuple(INF if t == "inf" else int(t) for t in text.split(","))


def _trace(kind, rng, m, options=None):
    return SegmentTrace(kind, rng.seed, rng.key, m, options or {})


def limit_prefix_312(m: int, rng: RngStream) -> ExtPrefix:
    """Blocks [T^Y_n + T^X_{n-1} + 1, T^Y_n + T^X_n] filled 312-avoiding, each followed by T^Y_n + T^X_{n-1}."""
    if m < 0:
        raise ValueError("m must be >= 0")
    ys, xs, content = rng.child("Y"), rng.child("X"), rng.child("content")
    trace = _trace("312", rng, m)
    out = []
    ty = tx = 0
    while len(out) < m:
        y = sample_Y(ys)
        x = sample_X_inversion(xs)
        ty += y
        a = ty + tx + 1
        vals = avoider_prefix(x, Pattern.P312, m - len(out), content, offset=a - 1)
        out.extend(vals)
        trace.segments.append(Segment("avoider-block", block=(a, a + x - 1),
                                      draws={"Y": y, "X": x}, materialized=len(vals)))
        single = Segment("singleton", value=ty + tx)
        if len(out) < m:
            out.append(ty + tx)
            single.materialized = 1
        trace.segments.append(single)
        tx += x
    return ExtPrefix(tuple(out), trace)


def limit_prefix_231(m: int, rng: RngStream) -> ExtPrefix:
    """Blocks [T^X_{n-1} + 1, T^X_n] filled 231-avoiding, each followed by a single infinity."""
    if m < 0:
        raise ValueError("m must be >= 0")
    xs, content = rng.child("X"), rng.child("content")
    trace = _trace("231", rng, m)
    out = []
    tx = 0
    while len(out) < m:
        x = sample_X_inversion(xs)
        vals = avoider_prefix(x, Pattern.P231, m - len(out), content, offset=tx)
        out.extend(vals)
        trace.segments.append(Segment("avoider-block", block=(tx + 1, tx + x),
                                      draws={"X": x}, materialized=len(vals)))
        run = Segment("infinity-run", run_length=1)
        if len(out) < m:
            out.append(INF)
            run.materialized = 1
        trace.segments.append(run)
        tx += x
    return ExtPrefix(tuple(out), trace)


def _index_intervals(chi: int, y1s, y0s, hats, y2_reading: str):
    """Consecutive intervals of the index set for the given coin, with their draws."""
    t1 = 0
    hat_sum = 0
    while True:
        y1 = sample_Y(y1s)
        y0 = sample_Y(y0s)
        draws = {"Y1": y1, "Y0": y0}
        steps = y0
        if y2_reading == "independent":
            # a third sequence drives the gaps; Y0 is drawn but unused
            y2 = sample_Y(y0s)
            draws["Y2"] = y2
            steps = y2
        h = [sample_hat_X(hats) for _ in range(steps)]
        draws["hatX"] = h
        if chi == 1:
            lo = t1 + hat_sum + 1
            hat_sum += sum(h)
        else:
            hat_sum += sum(h)
            lo = t1 + hat_sum + 1
        t1 += y1
        yield lo, lo + y1 - 1, draws


def limit_prefix_213(m: int, rng: RngStream, y2_reading: str = "y0") -> ExtPrefix:
    """Runs of X_n infinities, each followed by the next element of the index set picked by the coin."""
    if m < 0:
        raise ValueError("m must be >= 0")
    if y2_reading not in ("y0", "independent"):
        raise ValueError("y2_reading must be 'y0' or 'independent'")
    chi = rng.child("chi").bit()
    xs = rng.child("X")
    intervals = _index_intervals(chi, rng.child("Y1"), rng.child("Y0"), rng.child("hatX"), y2_reading)
    trace = _trace("213", rng, m, {"chi": chi, "y2_reading": y2_reading})
    out = []
    lo = hi = 0
    cur = None
    while len(out) < m:
        x = sample_X_inversion(xs)
        take = min(x, m - len(out))
        out.extend([INF] * take)
        trace.segments.append(Segment("infinity-run", run_length=x, draws={"X": x}, materialized=take))
        draws = {}
        if cur is None or cur >= hi:
            lo, hi, draws = next(intervals)
            cur = lo
        else:
            cur += 1
        single = Segment("singleton", value=cur, block=(lo, hi), draws=draws)
        if len(out) < m:
            out.append(cur)
            single.materialized = 1
        trace.segments.append(single)
    return ExtPrefix(tuple(out), trace)


def limit_prefix_321_partial(rng: RngStream, max_len: int | None = DEFAULT_MATERIALIZE) -> ExtPrefix:
    """Y - 1 block-irreducible 321-avoiding blocks of sizes hat-X_1, hat-X_2, ..., then a tail marker.

    Blocks are filled in until ``max_len`` entries have been produced; later
    blocks (and the rest of a block crossing the limit) are recorded in the
    trace but not drawn.  ``max_len=None`` fills every block.
    """
    ys, hs, content = rng.child("Y"), rng.child("hatX"), rng.child("content")
    trace = _trace("321-partial", rng, None, {"max_len": max_len})
    y = sample_Y(ys)
    out = []
    t = 0
    for _ in range(y - 1):
        h = sample_hat_X(hs)
        room = h if max_len is None else max(0, min(h, max_len - len(out)))
        if room == h:
            vals = list(sample_birr_321(h, content, offset=t).values)
            method = "rejection"
        elif room > 0:
            vals = birr_321_prefix(h, room, content, offset=t)
            method = "prefix"
        else:
            vals = []
            method = "none"
        out.extend(vals)
        trace.segments.append(Segment("birr-block", block=(t + 1, t + h),
                                      draws={"hatX": h, "method": method}, materialized=len(vals)))
        t += h
    trace.segments.append(Segment("tail-marker", draws={"Y": y, "M": t}))
    return ExtPrefix(tuple(out), trace)


def limit_prefix(kind: str, m: int, rng: RngStream, **options) -> ExtPrefix:
    kind = str(kind)
    if kind == "312":
        return limit_prefix_312(m, rng)
    if kind == "231":
        return limit_prefix_231(m, rng)
    if kind == "213":
        return limit_prefix_213(m, rng, **options)
    if kind == "321-partial":
        return limit_prefix_321_partial(rng, **options)
    raise ValueError(f"no limit generator for {kind!r}")


def replay(trace: SegmentTrace) -> ExtPrefix:
    """Rebuild a prefix from its segment skeleton and the content stream of its seed."""
    content = trace.stream().child("content")
    out = []
    pat = {"312": Pattern.P312, "231": Pattern.P231}.get(trace.generator)
    for seg in trace.segments:
        if seg.kind == "avoider-block":
            a = seg.block[0]
            out.extend(avoider_prefix(seg.length, pat, seg.materialized, content, offset=a - 1))
        elif seg.kind == "singleton":
            out.extend([seg.value] * seg.materialized)
        elif seg.kind == "infinity-run":
            out.extend([INF] * seg.materialized)
        elif seg.kind == "birr-block":
            a, b = seg.block
            method = seg.draws.get("method")
            if method == "rejection":
                out.extend(sample_birr_321(b - a + 1, content, offset=a - 1).values)
            elif method == "prefix":
                out.extend(birr_321_prefix(b - a + 1, seg.materialized, content, offset=a - 1))
    return ExtPrefix(tuple(out), trace)
