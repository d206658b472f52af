"""Order-preserving map over a process pool."""
from __future__ import annotations

import os
from concurrent.futures import ProcessPoolExecutor


def default_workers() -> int:
    return os.cpu_count() or 1


def parallel_map(fn, items, workers: int = 1) -> list:
    """``list(map(fn, items))``, optionally spread over ``workers`` processes.

    Results come back in input order, so callers see identical output for
    any worker count as long as ``fn`` is pure.
    """
    items = list(items)
    if workers <= 1 or len(items) < 2:
        return [fn(item) for item in items]
    chunksize = max(1, len(items) // (4 * workers))
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items, chunksize=chunksize))
