"""Deterministic fan-out for independent evaluation cells.

Results come back in input order no matter how the work is scheduled, so a
thread cap only changes wall time, never output.
"""

import os
from concurrent.futures import ThreadPoolExecutor


def thread_count(explicit: int | None = None) -> int:
    if explicit is not None and explicit > 0:
        return explicit
    try:
        return max(1, int(os.environ.get("RASHGAM_THREADS", "1")))
    except ValueError:
        return 1


def map_cells(fn, items, threads: int | None = None) -> list:
    """Apply fn to every item, optionally across a capped thread pool."""
    workers = thread_count(threads)
    items = list(items)
    if workers <= 1 or len(items) <= 1:
        return [fn(item) for item in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))
