"""
Bounded concurrent execution of independent experiment cells.

Cells are blocking, CPU-bound callables; they are dispatched to a thread
pool from an event loop and their results come back in submission order.
"""

from __future__ import annotations

import asyncio
import logging
from concurrent.futures import ThreadPoolExecutor
from typing import Callable, List, Sequence, TypeVar

logger = logging.getLogger(__name__)

T = TypeVar("T")
R = TypeVar("R")


class CellRunner:
    """Runs cells on at most ``workers`` threads"""

    def __init__(self, workers: int = 1):
        if workers < 1:
            raise ValueError(f"workers must be >= 1, got {workers}")
        self.workers = workers

    async def run_async(self, fn: Callable[[T], R], cells: Sequence[T]) -> List[R]:
        loop = asyncio.get_running_loop()
        semaphore = asyncio.Semaphore(self.workers)

        with ThreadPoolExecutor(max_workers=self.workers) as pool:

            async def run_one(index: int, cell: T) -> R:
                async with semaphore:
                    logger.debug(f"cell {index} started")
                    result = await loop.run_in_executor(pool, fn, cell)
                    logger.debug(f"cell {index} finished")
                    return result

            return list(
                await asyncio.gather(*(run_one(i, c) for i, c in enumerate(cells)))
            )

    def run(self, fn: Callable[[T], R], cells: Sequence[T]) -> List[R]:
        """Blocking entry point; results follow the order of ``cells``"""
        if self.workers == 1:
            return [fn(cell) for cell in cells]
        return asyncio.run(self.run_async(fn, cells))
