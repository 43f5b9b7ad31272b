from __future__ import annotations

from concurrent.futures import ProcessPoolExecutor


def ordered_map(fn, items, threads: int = 1, chunksize: int | None = None) -> list:
    """``list(map(fn, items))``, optionally spread over worker processes.

    Results come back in input order, and every task carries its own seed, so
    the output never depends on ``threads``.
    """
    items = list(items)
    if threads <= 1 or len(items) <= 1:
        return [fn(it) for it in items]
    workers = min(threads, len(items))
    if chunksize is None:
        chunksize = max(1, len(items) // (4 * workers))
    with ProcessPoolExecutor(max_workers=workers) as ex:
        return list(ex.map(fn, items, chunksize=chunksize))
