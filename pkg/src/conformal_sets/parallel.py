"""Bounded thread-pool mapping for per-subject work.

The CONFORMAL_SETS_THREADS environment variable caps the worker count;
unset means one worker per CPU. Results always come back in input order,
so parallel execution never changes output.
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from typing import Callable, Iterable, Sequence, TypeVar

T = TypeVar("T")
R = TypeVar("R")

ENV_VAR = "CONFORMAL_SETS_THREADS"


def max_workers() -> int:
    raw = os.environ.get(ENV_VAR)
    if raw is None:
        return os.cpu_count() or 1
    try:
        value = int(raw)
    except ValueError as exc:
        raise ValueError(f"{ENV_VAR} must be a positive integer, got {raw!r}") from exc
    if value < 1:
        raise ValueError(f"{ENV_VAR} must be a positive integer, got {value}")
    return value


def parallel_map(fn: Callable[[T], R], items: Iterable[T]) -> list[R]:
    """Apply ``fn`` to each item, preserving order; sequential when capped at 1."""
    seq: Sequence[T] = list(items)
    workers = min(max_workers(), len(seq)) or 1
    if workers == 1 or len(seq) <= 1:
        return [fn(item) for item in seq]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, seq))
