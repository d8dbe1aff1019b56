"""
Ordered fan-out of pure functions over a thread pool.

Results always come back in input order, whatever order the workers
finish in, so seeded runs stay reproducible for any worker count.
"""

import asyncio
import logging
import os
from concurrent.futures import ThreadPoolExecutor
from typing import Callable, Optional, Sequence, TypeVar

logger = logging.getLogger(__name__)

T = TypeVar("T")
R = TypeVar("R")

THREADS_ENV = "GBDP_THREADS"


def worker_count(max_workers: Optional[int] = None) -> int:
    """Explicit count, else GBDP_THREADS, else the CPU count."""
    if max_workers is not None:
        return max(1, int(max_workers))
    if env_value := os.environ.get(THREADS_ENV):
        try:
            return max(1, int(env_value))
        except ValueError:
            logger.warning(f"Ignoring invalid {THREADS_ENV}={env_value!r}")
    return os.cpu_count() or 1


async def map_ordered(func: Callable[[T], R], items: Sequence[T],
                      max_workers: Optional[int] = None) -> list[R]:
    """Run func over items in a thread pool; results ordered by input index."""
    if not items:
        return []
    loop = asyncio.get_running_loop()
    with ThreadPoolExecutor(max_workers=worker_count(max_workers)) as pool:
        futures = [loop.run_in_executor(pool, func, item) for item in items]
        return list(await asyncio.gather(*futures))


def run_ordered(func: Callable[[T], R], items: Sequence[T],
                max_workers: Optional[int] = None) -> list[R]:
    """Synchronous wrapper around map_ordered; runs inline with one worker."""
    items = list(items)
    if not items:
        return []
    if worker_count(max_workers) == 1 or len(items) == 1:
        return [func(item) for item in items]
    return asyncio.run(map_ordered(func, items, max_workers))
