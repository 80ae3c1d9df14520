"""Small shared helpers: thread-capped maps, growth classification."""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from typing import Callable, Sequence, TypeVar

T = TypeVar("T")
R = TypeVar("R")

THREAD_ENV = "OSCILLAB_THREADS"


def thread_budget() -> int:
    raw = os.environ.get(THREAD_ENV, "1")
    try:
        v = int(raw)
    except ValueError:
        return 1
    return max(1, v)


def parallel_map(fn: Callable[[T], R], items: Sequence[T]) -> list[R]:
    """Order-preserving map, threaded when OSCILLAB_THREADS > 1.

    Results are collected by index and reduced by the caller in list order,
    so the thread count never changes any computed value.
    """
    budget = thread_budget()
    if budget <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=budget) as pool:
        return list(pool.map(fn, items))


def growth_steps(values: Sequence[float]) -> list[float]:
    """Relative step growths (v[i+1] - v[i]) / v[i]."""
    out = []
    for a, b in zip(values, values[1:]):
        out.append((b - a) / a if a != 0 else float("inf"))
    return out


def classify_growth(
    values: Sequence[float], stable_tol: float = 0.05, growth_tol: float = 0.5
) -> str:
    """'stable' when the final step grows less than stable_tol, 'growing'
    when every step exceeds growth_tol, otherwise 'undetermined'."""
    steps = growth_steps(values)
    if not steps:
        return "stable"
    if steps[-1] < stable_tol:
        return "stable"
    if all(s > growth_tol for s in steps):
        return "growing"
    return "undetermined"


def is_monotone_increasing(values: Sequence[float]) -> bool:
    return all(b > a for a, b in zip(values, values[1:]))
