import logging
from concurrent.futures import ThreadPoolExecutor
from typing import Callable, Dict, Optional, TypeVar

import psutil

logger = logging.getLogger(__name__)

T = TypeVar("T")


def optimal_workers(max_workers: Optional[int] = None) -> int:
    """Thread count scaled to the current CPU load."""
    cpu_count = psutil.cpu_count() or 1
    cpu_percent = psutil.cpu_percent(interval=None)

    if cpu_percent > 90:
        workers = max(1, cpu_count // 4)
    elif cpu_percent > 70:
        workers = max(1, cpu_count // 2)
    else:
        workers = max(1, int(cpu_count * 0.75))
    if max_workers is not None:
        workers = min(workers, max_workers)
    return workers


def run_tasks(
    tasks: Dict[str, Callable[[], T]], max_workers: Optional[int] = None
) -> Dict[str, T]:
    """
    Run independent callables concurrently and collect results by name.

    Results come back in the insertion order of ``tasks`` regardless of the
    completion order; exceptions propagate from ``future.result()``.
    """
    workers = optimal_workers(max_workers or len(tasks))
    if workers <= 1 or len(tasks) <= 1:
        return {name: task() for name, task in tasks.items()}
    logger.debug(f"Running {len(tasks)} tasks on {workers} threads")
    with ThreadPoolExecutor(max_workers=workers) as pool:
        futures = {name: pool.submit(task) for name, task in tasks.items()}
        return {name: future.result() for name, future in futures.items()}
