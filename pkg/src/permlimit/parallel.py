"""Deterministic chunked Monte Carlo.

Trials are cut into fixed-size chunks; chunk c always draws from
``rng.child("chunk", c)``, whatever the number of workers.  Results come
back in chunk order, so merged counts and sums are identical for any
``jobs`` value.
"""

from __future__ import annotations

import os
from concurrent.futures import ProcessPoolExecutor

from .rng import RngStream

CHUNK = 4096


def chunks(trials: int, size: int = CHUNK):
    """(chunk index, number of trials) pairs covering ``trials``."""
    out = []
    start = 0
    c = 0
    while start < trials:
        k = min(size, trials - start)
        out.append((c, k))
        start += k
        c += 1
    return out


def _run(task):
    fn, rng, count, args = task
    return fn(rng, count, *args)


def map_chunks(fn, trials: int, rng: RngStream, jobs: int = 1, size: int = CHUNK, args=()) -> list:
    """Call ``fn(chunk_stream, count, *args)`` for every chunk; results in chunk order.

    ``fn`` must be a module-level function when ``jobs > 1``.
    """
    tasks = [(fn, rng.child("chunk", c), k, tuple(args)) for c, k in chunks(trials, size)]
    jobs = resolve_jobs(jobs)
    if jobs <= 1 or len(tasks) <= 1:
        return [_run(t) for t in tasks]
    with ProcessPoolExecutor(max_workers=min(jobs, len(tasks))) as pool:
        return list(pool.map(_run, tasks))


def resolve_jobs(jobs) -> int:
    if jobs is None or int(jobs) <= 0:
        return os.cpu_count() or 1
    return int(jobs)
