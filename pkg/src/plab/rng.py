"""Counter-based random streams.

Every stream is ``Generator(Philox(SeedSequence(seed, spawn_key=key)))``.  Monte Carlo
work is cut into fixed-size chunks and chunk ``i`` always draws from spawn key ``(i,)``,
so results do not depend on how many worker threads process the chunks.
"""
from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor

import numpy as np

CHUNK = 1 << 17
_THREADS = 1


def make_rng(seed: int, key: tuple[int, ...] = ()) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(seed, spawn_key=key)))


def as_seed(rng) -> int:
    """An integer master seed from an int or a Generator (drawn once)."""
    if isinstance(rng, (int, np.integer)):
        return int(rng)
    return int(rng.integers(0, 2**63 - 1))


def chunks(total: int, size: int = CHUNK) -> list[tuple[int, int]]:
    return [(i, min(size, total - i * size)) for i in range((total + size - 1) // size)]


def set_threads(n: int) -> None:
    global _THREADS
    _THREADS = max(1, int(n))


def pmap(fn, items) -> list:
    """Ordered map, threaded when more than one worker is configured."""
    items = list(items)
    if _THREADS == 1 or len(items) < 2:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(_THREADS) as ex:
        return list(ex.map(fn, items))
