"""Reproducible random streams.

Every Monte Carlo routine takes an explicit seed and shard count.  Shard
``i`` always receives the ``i``-th child of ``SeedSequence(seed)``, so a run
is bit-identical for a fixed ``(seed, shards)`` pair regardless of how the
shards are scheduled.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from typing import Callable, Sequence, TypeVar

import numpy as np

T = TypeVar("T")


def spawn_streams(seed: int, shards: int = 1) -> list[np.random.Generator]:
    if seed is None:
        raise ValueError("a seed is required for Monte Carlo work")
    if shards < 1:
        raise ValueError(f"shards must be >= 1, got {shards}")
    children = np.random.SeedSequence(int(seed)).spawn(shards)
    return [np.random.Generator(np.random.PCG64(c)) for c in children]


def split_counts(total: int, parts: int) -> list[int]:
    """Split ``total`` into ``parts`` near-equal non-negative integers."""
    base, extra = divmod(int(total), parts)
    return [base + (1 if i < extra else 0) for i in range(parts)]


def run_sharded(fn: Callable[[int], T], shards: int, workers: int | None = None) -> list[T]:
    """Evaluate ``fn(i)`` for every shard index and return results in shard order."""
    if shards == 1 or workers == 1:
        return [fn(i) for i in range(shards)]
    with ThreadPoolExecutor(max_workers=workers or shards) as pool:
        return list(pool.map(fn, range(shards)))


def pairwise_sum(values: Sequence[float]) -> float:
    """Pairwise summation; order-stable for a fixed input order."""
    vals = list(values)
    if not vals:
        return 0.0
    while len(vals) > 1:
        nxt = [vals[i] + vals[i + 1] for i in range(0, len(vals) - 1, 2)]
        if len(vals) % 2:
            nxt.append(vals[-1])
        vals = nxt
    return float(vals[0])
