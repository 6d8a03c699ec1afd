# core/worker_pool.py
import asyncio
import logging
from typing import Callable, List, Sequence, TypeVar

logger = logging.getLogger("WorkerPool")

T = TypeVar("T")
R = TypeVar("R")


async def run_bounded(func: Callable[[T], R], items: Sequence[T], jobs: int = 1) -> List[R]:
    """
    ينفّذ func على كل عنصر في خيوط منفصلة بحد أقصى jobs في آن واحد.
    النتائج تعود بترتيب المدخلات دائمًا، مهما كان ترتيب انتهاء المهام.
    """
    semaphore = asyncio.Semaphore(max(1, int(jobs)))

    async def _run(item: T) -> R:
        async with semaphore:
            return await asyncio.to_thread(func, item)

    if jobs > 1:
        logger.debug(f"Dispatching {len(items)} work items on {jobs} workers")
    return list(await asyncio.gather(*(_run(item) for item in items)))
