"""Seeded random streams and ordered parallel map.

Work is always split into fixed-size chunks whose seeds depend only on
(seed, key, chunk index); thread count never changes the numbers produced.
"""
from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from typing import Callable, Iterable, Sequence

import numpy as np

_MASK64 = (1 << 64) - 1


def rng_for(seed: int, *keys: int) -> np.random.Generator:
    """Independent generator for (seed, keys...)."""
    entropy = [int(seed) & _MASK64, *(int(k) & _MASK64 for k in keys)]
    return np.random.default_rng(np.random.SeedSequence(entropy))


def chunk_sizes(total: int, chunk: int) -> list[int]:
    total = int(total)
    if total < 1:
        raise ValueError(f"need at least one sample, got {total}")
    n_full, rest = divmod(total, chunk)
    return [chunk] * n_full + ([rest] if rest else [])


_threads = None


def set_threads(n: int | None) -> None:
    global _threads
    _threads = n


def default_threads() -> int:
    if _threads:
        return max(1, int(_threads))
    return max(1, os.cpu_count() or 1)


def ordered_map(fn: Callable, items: Sequence | Iterable, threads: int | None = None) -> list:
    """map() with an optional thread pool; results keep input order."""
    items = list(items)
    n = threads or default_threads()
    if n <= 1 or len(items) <= 1:
        return [fn(it) for it in items]
    with ThreadPoolExecutor(max_workers=n) as pool:
        return list(pool.map(fn, items))
