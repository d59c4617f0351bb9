"""Deterministic chunked evaluation.

Pair sums are split into fixed-size row chunks. The chunk layout never
depends on the worker count and partial results are combined in chunk
order, so the floating point result is the same for any number of
threads.
"""
from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from typing import Callable, TypeVar

T = TypeVar("T")

CHUNK_ROWS = 256


def worker_count() -> int:
    """Number of worker threads, from ``FRACP_THREADS`` (0 or unset = auto)."""
    raw = os.environ.get("FRACP_THREADS", "0").strip() or "0"
    try:
        n = int(raw)
    except ValueError:
        n = 0
    if n <= 0:
        n = os.cpu_count() or 1
    return max(1, n)


def chunk_slices(n: int, chunk: int = CHUNK_ROWS) -> list[slice]:
    return [slice(i, min(i + chunk, n)) for i in range(0, n, chunk)]


def map_chunks(fn: Callable[[slice], T], n: int, chunk: int = CHUNK_ROWS) -> list[T]:
    """Apply ``fn`` to every row slice of ``range(n)``; results in slice order."""
    slices = chunk_slices(n, chunk)
    workers = min(worker_count(), len(slices))
    if workers <= 1:
        return [fn(sl) for sl in slices]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, slices))


def map_items(fn: Callable[[T], object], items: list) -> list:
    """Apply ``fn`` to independent items on the worker pool; results in item order."""
    workers = min(worker_count(), len(items))
    if workers <= 1:
        return [fn(it) for it in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))
