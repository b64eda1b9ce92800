"""Deterministic parallel fan-out for independent (seed, lag) jobs.

Each job derives all randomness from its own arguments, so results are
identical whether jobs run sequentially or across processes; ordering of
returned results follows the task list either way.
"""

from __future__ import annotations

from concurrent.futures import ProcessPoolExecutor


def parallel_map(fn, tasks, workers: int = 1) -> list:
    tasks = list(tasks)
    if workers <= 1 or len(tasks) <= 1:
        return [fn(task) for task in tasks]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, tasks))
