"""Replicate-parallel map with a deterministic merge.

Each replicate gets a seed derived from ``(master, index)`` and results come
back in index order, so the output does not depend on the thread count.  The
compiled kernels release the GIL, which is what makes threads worthwhile.
"""
from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from typing import Callable, Sequence

from .seeding import derive_seed


def replicate_map(fn: Callable[[int, int], object], n: int, master_seed: int,
                  threads: int = 1, stream: Sequence[int] = ()) -> list:
    """``[fn(i, derive_seed(master_seed, i, *stream)) for i in range(n)]``,
    evaluated on ``threads`` workers."""
    seeds = [derive_seed(master_seed, i, *stream) for i in range(n)]
    if threads <= 1 or n <= 1:
        return [fn(i, s) for i, s in enumerate(seeds)]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, range(n), seeds))
