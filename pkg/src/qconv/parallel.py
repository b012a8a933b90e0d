"""Deterministic parallel mapping over independent pure tasks.

Results always come back in task order regardless of completion order, so
a fixed-order reduction over them is reproducible for any worker count.
Threads are the right fit here: the heavy lifting inside each task is
numpy array math, which releases the GIL.
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from typing import Any, Callable, Sequence

WORKERS_ENV = "QCONV_WORKERS"


class TaskError(RuntimeError):
    """Raised when a task in a batch fails; remembers which one."""

    def __init__(self, index: int, cause: BaseException):
        super().__init__(f"task {index} failed: {cause!r}")
        self.index = index
        self.cause = cause


def default_workers() -> int:
    value = os.environ.get(WORKERS_ENV, "")
    try:
        return max(1, int(value))
    except ValueError:
        return 1


def map_batch(tasks: Sequence[Callable[[], Any]], workers: int = 1) -> list:
    """Run ``tasks`` and return their results in task order.

    ``workers == 1`` is a plain loop.  With more workers the tasks run on a
    thread pool; the first failing task (in task order) aborts the batch
    with a ``TaskError`` carrying its index.
    """
    if workers < 1:
        raise ValueError(f"workers must be >= 1, got {workers}")
    if workers == 1 or len(tasks) <= 1:
        results = []
        for i, task in enumerate(tasks):
            try:
                results.append(task())
            except Exception as exc:
                raise TaskError(i, exc) from exc
        return results
    with ThreadPoolExecutor(max_workers=workers) as pool:
        futures = [pool.submit(task) for task in tasks]
        results = []
        for i, future in enumerate(futures):
            try:
                results.append(future.result())
            except Exception as exc:
                raise TaskError(i, exc) from exc
        return results
