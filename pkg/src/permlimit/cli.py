"""Command line front end.

Exit codes: 0 success / all thresholds met, 1 a verification threshold failed
(or a replay mismatched), 2 usage error.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import sys
from fractions import Fraction

from . import __version__
from .catalan import catalan
from .limits import SegmentTrace, limit_prefix, parse_entries, replay
from .parallel import map_chunks
from .patterns import (ALL_PATTERNS, EXHAUSTIVE_BOUND, Pattern, contains, enumerate_avoiders,
                       is_block_irreducible)
from .rng import RNG_NAME, RngStream
from .samplers import sample_avoider
from . import verify

SEED_ENV = "PERMLIMIT_SEED"
JOBS_ENV = "PERMLIMIT_JOBS"
DEFAULT_SEED = 20240611


class UsageError(Exception):
    pass


def _env_int(name, default):
    val = os.environ.get(name)
    if val is None or val == "":
        return default
    try:
        return int(val)
    except ValueError:
        raise UsageError(f"{name} must be an integer, got {val!r}") from None


def _pattern(s):
    try:
        return Pattern.parse(s)
    except ValueError as e:
        raise argparse.ArgumentTypeError(str(e))


def _count(s):
    # accepts 100000, 1e5, 10**5
    try:
        if "**" in s:
            b, e = s.split("**")
            v = int(b) ** int(e)
        else:
            v = float(s)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a count: {s!r}")
    if v != int(v) or v < 0:
        raise argparse.ArgumentTypeError(f"not a count: {s!r}")
    return int(v)


def _common(p, fmt="lines"):
    p.add_argument("--seed", type=int, default=None,
                   help=f"64-bit seed (default ${SEED_ENV} or {DEFAULT_SEED})")
    p.add_argument("--jobs", type=int, default=None,
                   help=f"worker processes (default ${JOBS_ENV} or 1); never changes results")
    p.add_argument("--format", choices=("csv", "json", "lines"), default=fmt)
    p.add_argument("--output", default=None, help="write to this file instead of stdout")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="permlimit",
                                 description="Pattern-avoiding permutations and their limits.")
    ap.add_argument("--version", action="version", version=f"permlimit {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("sample", help="uniform pattern-avoiding permutations")
    p.add_argument("--pattern", type=_pattern, required=True)
    p.add_argument("--n", type=_count, required=True)
    p.add_argument("--trials", type=_count, default=1)
    _common(p)

    p = sub.add_parser("enumerate", help="all avoiders of [n] and their count")
    p.add_argument("--pattern", type=_pattern, required=True)
    p.add_argument("--n", type=_count, required=True)
    p.add_argument("--birr-only", action="store_true", help="keep block-irreducible ones only")
    p.add_argument("--bound", type=int, default=EXHAUSTIVE_BOUND)
    _common(p)

    p = sub.add_parser("limit", help="prefix of a limit object")
    p.add_argument("--pattern", required=True,
                   help="312, 231, 213 or 321-partial")
    p.add_argument("--prefix-len", type=_count, default=20)
    p.add_argument("--trace", action="store_true", help="print the segment trace after the prefix")
    p.add_argument("--replay", metavar="FILE", default=None,
                   help="rebuild the prefix from a saved trace and check it")
    p.add_argument("--y2-reading", choices=("y0", "independent"), default="y0")
    p.add_argument("--max-len", type=_count, default=None,
                   help="321-partial: stop filling blocks after this many entries")
    _common(p)

    v = sub.add_parser("verify", help="verification experiments")
    vs = v.add_subparsers(dest="experiment", required=True)

    p = vs.add_parser("counts", help="|S_n(pattern)| against C_n")
    p.add_argument("--max-n", type=_count, default=8)
    p.add_argument("--birr", action="store_true",
                   help="block-irreducible 321-avoiders by first irreducible block")
    _common(p, "json")

    p = vs.add_parser("positional", help="law of the pivot position against the split law")
    p.add_argument("--pattern", type=_pattern, required=True)
    p.add_argument("--n", type=_count, required=True)
    p.add_argument("--exact", action="store_true")
    p.add_argument("--trials", type=_count, default=100_000)
    p.add_argument("--z", type=float, default=4.0, help="Monte Carlo threshold in standard errors")
    _common(p, "json")

    p = vs.add_parser("convergence", help="TV distance of coordinate laws to the limit")
    p.add_argument("--pattern", type=_pattern, required=True)
    p.add_argument("--i", type=_count, nargs="+", default=[1, 2, 3])
    p.add_argument("--cap", type=_count, default=10)
    p.add_argument("--n-grid", type=_count, nargs="+", default=[200, 800, 2000])
    p.add_argument("--trials", type=_count, default=100_000)
    p.add_argument("--tol", type=float, default=0.05)
    p.add_argument("--y2-reading", choices=("y0", "independent"), default="y0")
    p.add_argument("--joint", action="store_true",
                   help="also require the (sigma_1, sigma_2) law to pass")
    _common(p, "json")

    p = vs.add_parser("escape", help="P(sigma_j <= L) along an n grid")
    p.add_argument("--pattern", type=_pattern, required=True)
    p.add_argument("--j", type=_count, default=1)
    p.add_argument("--L", type=_count, default=3)
    p.add_argument("--n-grid", type=_count, nargs="+", default=[50, 200, 800])
    p.add_argument("--trials", type=_count, default=100_000)
    p.add_argument("--tol", type=float, default=0.02)
    _common(p, "json")

    p = vs.add_parser("stable", help="characteristic function of T_n^X / n^2")
    p.add_argument("--n", type=_count, default=10_000)
    p.add_argument("--trials", type=_count, default=10_000)
    p.add_argument("--t", type=float, nargs="+", default=[0.5, 1.0, 2.0])
    p.add_argument("--tol", type=float, default=0.03)
    p.add_argument("--method", choices=("vector", "inversion", "walk"), default="vector")
    _common(p, "json")

    p = vs.add_parser("uniformity", help="chi-square uniformity of the samplers")
    p.add_argument("--pattern", type=_pattern, nargs="+", default=list(ALL_PATTERNS))
    p.add_argument("--n", type=_count, nargs="+", default=[2, 3, 4, 5, 6, 7])
    p.add_argument("--draws", type=_count, default=1_000_000)
    p.add_argument("--level", type=float, default=0.999)
    _common(p, "json")
    return ap


# ---------------------------------------------------------------- output


def _jsonable(x):
    if isinstance(x, Fraction):
        return float(x)
    if isinstance(x, complex):
        return [x.real, x.imag]
    if isinstance(x, (list, tuple)):
        return [_jsonable(y) for y in x]
    if isinstance(x, dict):
        return {str(k): _jsonable(v) for k, v in x.items()}
    if hasattr(x, "value") and isinstance(x, Pattern):
        return x.value
    return x


def _config(args) -> dict:
    skip = {"output", "jobs", "format"}
    return {k: _jsonable(v) for k, v in sorted(vars(args).items()) if k not in skip}


def _report(args, seed, rows, passed, thresholds) -> dict:
    return {
        "tool": "permlimit",
        "version": __version__,
        "command": f"verify {args.experiment}",
        "seed": seed,
        "rng": RNG_NAME,
        "config": _config(args),
        "thresholds": _jsonable(thresholds),
        "passed": bool(passed),
        "rows": [_jsonable(r) for r in rows],
    }


def _render_report(rep: dict, fmt: str) -> str:
    if fmt == "json":
        return json.dumps(rep, indent=2, sort_keys=True) + "\n"
    buf = io.StringIO()
    for key in ("tool", "version", "command", "seed", "rng"):
        buf.write(f"# {key}={rep[key]}\n")
    buf.write(f"# config={json.dumps(rep['config'], sort_keys=True)}\n")
    buf.write(f"# thresholds={json.dumps(rep['thresholds'], sort_keys=True)}\n")
    buf.write(f"# passed={str(rep['passed']).lower()}\n")
    rows = rep["rows"]
    if rows:
        fields = list(rows[0].keys())
        w = csv.DictWriter(buf, fieldnames=fields, lineterminator="\n")
        w.writeheader()
        for r in rows:
            w.writerow({k: (json.dumps(v) if isinstance(v, (list, dict)) else v) for k, v in r.items()})
    return buf.getvalue()


def _emit(text: str, args):
    if args.output:
        with open(args.output, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


# ---------------------------------------------------------------- commands


AUDIT_EVERY = 100


def _sample_chunk(rng, count, pat, n):
    out = []
    for k in range(count):
        p = sample_avoider(n, pat, rng)
        # audit a fixed 1% of the samples for avoidance
        if k % AUDIT_EVERY == 0 and contains(p, pat):
            raise RuntimeError(f"sampler emitted {p.serialize()}, which contains {pat}")
        out.append(p.serialize())
    return out


def cmd_sample(args, seed, jobs) -> int:
    rng = RngStream(seed)
    lines = []
    for part in map_chunks(_sample_chunk, args.trials, rng, jobs, args=(args.pattern, args.n)):
        lines.extend(part)
    if args.format == "lines":
        text = "".join(line + "\n" for line in lines)
    elif args.format == "csv":
        text = "index,permutation\n" + "".join(f'{i},"{line}"\n' for i, line in enumerate(lines))
    else:
        text = json.dumps({"tool": "permlimit", "version": __version__, "seed": seed, "rng": RNG_NAME,
                           "config": _config(args), "permutations": lines}, indent=2, sort_keys=True) + "\n"
    _emit(text, args)
    return 0


def cmd_enumerate(args, seed, jobs) -> int:
    if args.n > args.bound:
        raise UsageError(f"n={args.n} exceeds the exhaustive bound {args.bound}")
    perms = enumerate_avoiders(args.n, args.pattern, args.bound)
    if args.birr_only:
        perms = (p for p in perms if len(p) and is_block_irreducible(p))
    lines = [p.serialize() for p in perms]
    if args.format == "json":
        text = json.dumps({"tool": "permlimit", "version": __version__, "config": _config(args),
                           "permutations": lines, "count": len(lines)}, indent=2, sort_keys=True) + "\n"
    elif args.format == "csv":
        text = "permutation\n" + "".join(f'"{line}"\n' for line in lines)
    else:
        text = "".join(line + "\n" for line in lines) + f"count={len(lines)}\n"
    _emit(text, args)
    return 0


def cmd_limit(args, seed, jobs) -> int:
    kind = args.pattern
    if kind in ("123", "132"):
        raise UsageError(
            f"pattern {kind}: the uniform measures converge to the point mass on the sequence "
            "that is infinite at every position, so there is nothing to sample")
    if kind not in ("312", "231", "213", "321-partial"):
        raise UsageError(f"no limit generator for {kind!r}; choose 312, 231, 213 or 321-partial")
    options = {}
    if kind == "213":
        options["y2_reading"] = args.y2_reading
    if kind == "321-partial" and args.max_len is not None:
        options["max_len"] = args.max_len

    if args.replay:
        return _replay(args)

    pre = limit_prefix(kind, args.prefix_len, RngStream(seed), **options)
    if args.format == "json":
        doc = {"tool": "permlimit", "version": __version__, "seed": seed, "rng": RNG_NAME,
               "config": _config(args), "prefix": pre.serialize()}
        if args.trace:
            doc["trace"] = pre.trace.to_dict()
        text = json.dumps(doc, indent=2, sort_keys=True) + "\n"
    elif args.format == "csv":
        text = "position,entry\n" + "".join(f"{i},{e}\n" for i, e in enumerate(pre.entries, 1))
    else:
        text = pre.serialize() + "\n"
        if args.trace:
            text += pre.trace.to_json() + "\n"
    _emit(text, args)
    return 0


def _replay(args) -> int:
    try:
        with open(args.replay, encoding="utf-8") as fh:
            raw = fh.read()
    except OSError as e:
        raise UsageError(f"cannot read trace: {e}") from None
    recorded, trace = _parse_trace_file(raw)
    rebuilt = replay(trace)
    options = dict(trace.options)
    if trace.generator == "213":
        options = {"y2_reading": options.get("y2_reading", "y0")}
    elif trace.generator == "321-partial":
        options = {"max_len": options.get("max_len")}
    else:
        options = {}
    fresh = limit_prefix(trace.generator, trace.m or 0, trace.stream(), **options)
    ok = rebuilt.entries == fresh.entries and fresh.trace.to_dict() == trace.to_dict()
    if recorded is not None:
        ok = ok and recorded == rebuilt.entries
    sys.stdout.write(rebuilt.serialize() + "\n")
    if not ok:
        sys.stderr.write("replay mismatch: trace does not reproduce the recorded prefix\n")
        return 1
    return 0


def _parse_trace_file(raw: str):
    text = raw.strip()
    try:
        doc = json.loads(text)
    except json.JSONDecodeError:
        doc = None
    if isinstance(doc, dict) and "trace" in doc:
        return parse_entries(doc.get("prefix", "")), SegmentTrace.from_dict(doc["trace"])
    if isinstance(doc, dict):
        return None, SegmentTrace.from_dict(doc)
    lines = raw.splitlines()
    if len(lines) >= 2:
        try:
            return parse_entries(lines[-2]), SegmentTrace.from_json(lines[-1])
        except (ValueError, KeyError) as e:
            raise UsageError(f"malformed trace file: {e}") from None
    raise UsageError("malformed trace file")


def _verify_counts(args, seed, jobs):
    rows = []
    if args.birr:
        if args.max_n > EXHAUSTIVE_BOUND:
            raise UsageError(f"max-n above the exhaustive bound {EXHAUSTIVE_BOUND}")
        for n, j, k, ref in verify.birr_counts(args.max_n):
            rows.append({"n": n, "j": j, "count": k, "expected": ref, "ok": k == ref})
        totals = {}
        for r in rows:
            if r["j"] == r["n"]:
                totals[r["n"]] = r["count"]
        for n, k in totals.items():
            rows.append({"n": n, "j": "irreducible", "count": k, "expected": catalan(n - 1),
                         "ok": k == catalan(n - 1)})
    else:
        if args.max_n > EXHAUSTIVE_BOUND:
            raise UsageError(f"max-n above the exhaustive bound {EXHAUSTIVE_BOUND}")
        for pat, n, k, ref in verify.avoider_counts(args.max_n):
            rows.append({"pattern": pat, "n": n, "count": k, "catalan": ref, "ok": k == ref})
    return rows, all(r["ok"] for r in rows), {"exact": True}


def _verify_positional(args, seed, jobs):
    if args.pattern not in (Pattern.P312, Pattern.P213, Pattern.P231, Pattern.P132):
        raise UsageError("positional law covers 312, 213, 231 and 132")
    if args.exact:
        if args.n > EXHAUSTIVE_BOUND:
            raise UsageError(f"n above the exhaustive bound {EXHAUSTIVE_BOUND}")
        res = verify.positional_law(args.n, args.pattern, exact=True)
        passed = res.max_error == 0
        thresholds = {"max_error": 0}
    else:
        res = verify.positional_law(args.n, args.pattern, exact=False, trials=args.trials,
                                    rng=RngStream(seed), jobs=jobs)
        passed = res.max_z <= args.z
        thresholds = {"max_z": args.z}
    rows = [{"j": j, "observed": a, "expected": b, "error": abs(a - b)}
            for j, (a, b) in enumerate(zip(res.law, res.reference), 1)]
    rows.append({"j": "max", "observed": None, "expected": None, "error": res.max_error})
    return rows, passed, thresholds


def _verify_convergence(args, seed, jobs):
    if args.pattern not in (Pattern.P312, Pattern.P231, Pattern.P213):
        raise UsageError("convergence covers 312, 231 and 213")
    options = {"y2_reading": args.y2_reading} if args.pattern is Pattern.P213 else {}
    rep = verify.convergence_report(args.pattern, args.i, args.cap, args.n_grid, args.trials,
                                    RngStream(seed), jobs, **options)
    allowance = 2 / math.sqrt(args.trials)
    passed = True
    for i in sorted(set(args.i)):
        tvs = rep.series(i)
        passed &= verify.nonincreasing(tvs, allowance) and tvs[-1] <= args.tol
    joint = [tv for n, tv in rep.joint]
    if args.joint and joint:
        passed &= verify.nonincreasing(joint, allowance) and joint[-1] <= args.tol
    rows = [{"i": i, "n": n, "tv": tv} for i, n, tv in rep.rows]
    rows += [{"i": "1,2", "n": n, "tv": tv} for n, tv in rep.joint]
    return rows, passed, {"tv_at_largest_n": args.tol, "trend_allowance": allowance}


def _verify_escape(args, seed, jobs):
    if args.pattern not in (Pattern.P123, Pattern.P132):
        raise UsageError("escape scan covers 123 and 132")
    if args.j > min(args.n_grid):
        raise UsageError("need j <= min(n-grid)")
    res = verify.escape_scan(args.pattern, args.j, args.L, args.n_grid, args.trials,
                             RngStream(seed), jobs)
    probs = [float(r.probability) for r in res]
    passed = verify.nonincreasing(probs) and probs[-1] < args.tol
    rows = [{"n": r.n, "probability": r.probability, "trials": r.trials, "mode": r.mode} for r in res]
    return rows, passed, {"probability_at_largest_n_below": args.tol, "trend": "nonincreasing"}


def _verify_stable(args, seed, jobs):
    pts = verify.stable_cf_check(args.n, args.trials, args.t, RngStream(seed), jobs, args.method)
    rows = [{"t": p.t, "empirical_re": p.empirical.real, "empirical_im": p.empirical.imag,
             "reference_re": p.reference.real, "reference_im": p.reference.imag,
             "abs_error": p.abs_error} for p in pts]
    return rows, all(p.abs_error <= args.tol for p in pts), {"abs_error": args.tol}


def _verify_uniformity(args, seed, jobs):
    rng = RngStream(seed)
    rows = []
    for pat in args.pattern:
        for n in args.n:
            if n > EXHAUSTIVE_BOUND:
                raise UsageError(f"n above the exhaustive bound {EXHAUSTIVE_BOUND}")
            r = verify.uniformity(pat, n, args.draws, rng.child(str(pat), n), jobs, args.level)
            rows.append({"pattern": r.pattern, "n": n, "draws": r.draws, "classes": r.classes,
                         "chi2": r.chi2, "critical": r.critical,
                         "avoidance_failures": r.avoidance_failures, "passed": r.passed})
    return rows, all(r["passed"] for r in rows), {"level": args.level, "avoidance_failures": 0}


_VERIFY = {
    "counts": _verify_counts,
    "positional": _verify_positional,
    "convergence": _verify_convergence,
    "escape": _verify_escape,
    "stable": _verify_stable,
    "uniformity": _verify_uniformity,
}


def cmd_verify(args, seed, jobs) -> int:
    if args.format == "lines":
        raise UsageError("verify reports are csv or json")
    rows, passed, thresholds = _VERIFY[args.experiment](args, seed, jobs)
    _emit(_render_report(_report(args, seed, rows, passed, thresholds), args.format), args)
    return 0 if passed else 1


_COMMANDS = {
    "sample": cmd_sample,
    "enumerate": cmd_enumerate,
    "limit": cmd_limit,
    "verify": cmd_verify,
}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        seed = args.seed if args.seed is not None else _env_int(SEED_ENV, DEFAULT_SEED)
        jobs = args.jobs if args.jobs is not None else _env_int(JOBS_ENV, 1)
        if jobs < 1:
            raise UsageError("--jobs must be >= 1")
        args.seed = seed
        return _COMMANDS[args.command](args, seed, jobs)
    except UsageError as e:
        sys.stderr.write(f"permlimit: error: {e}\n")
        return 2
    except ValueError as e:
        sys.stderr.write(f"permlimit: error: {e}\n")
        return 2


if __name__ == "__main__":
    sys.exit(main())
