"""Optional thread-level parallelism for grid evaluations.

``DEFLAB_THREADS`` caps the worker count (default 1, i.e. serial). LAPACK
calls release the GIL, so threads help for larger dimensions.
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from typing import Callable, Iterable, TypeVar

T = TypeVar("T")
R = TypeVar("R")


def n_threads() -> int:
    try:
        return max(1, int(os.environ.get("DEFLAB_THREADS", "1")))
    except ValueError:
        return 1


def pmap(func: Callable[[T], R], items: Iterable[T]) -> list[R]:
    """Order-preserving map, threaded when ``DEFLAB_THREADS > 1``."""
    items = list(items)
    k = n_threads()
    if k == 1 or len(items) < 2:
        return [func(x) for x in items]
    with ThreadPoolExecutor(max_workers=k) as ex:
        return list(ex.map(func, items))
