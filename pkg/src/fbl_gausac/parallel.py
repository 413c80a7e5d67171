"""Deterministic fan-out of independent work units.

Work is split into units whose random streams depend only on the unit index
(see :mod:`fbl_gausac.rng`), so the merged result is the same whether the units
run in one process or many.
"""

from __future__ import annotations

import os
from concurrent.futures import ProcessPoolExecutor
from typing import Callable, Iterable, Sequence, TypeVar

T = TypeVar("T")
R = TypeVar("R")

WORKERS_ENV = "FBL_GAUSAC_WORKERS"


def default_workers() -> int:
    """Worker count from ``FBL_GAUSAC_WORKERS``, falling back to 1."""
    raw = os.environ.get(WORKERS_ENV, "").strip()
    if not raw:
        return 1
    try:
        value = int(raw)
    except ValueError:
        return 1
    return max(value, 1)


def map_units(fn: Callable[[T], R], units: Sequence[T] | Iterable[T], workers: int | None = None) -> list[R]:
    """``[fn(u) for u in units]``, optionally spread across worker processes.

    Results come back in input order.  ``fn`` and the units must be picklable
    when ``workers > 1``.
    """
    units = list(units)
    if workers is None:
        workers = default_workers()
    if workers <= 1 or len(units) <= 1:
        return [fn(u) for u in units]
    with ProcessPoolExecutor(max_workers=min(workers, len(units))) as pool:
        return list(pool.map(fn, units))
