import logging
from concurrent.futures import ProcessPoolExecutor
from typing import Callable, Sequence, TypeVar

"""
Pool de workers para réplicas y seeds.

Cada tarea recibe una copia propia de sus argumentos (parámetros, stream de ruido);
`ex.map` conserva el orden de entrada, así que la fusión la hace un único escritor.
"""

_logger = logging.getLogger(__name__)

T = TypeVar("T")
R = TypeVar("R")


def run_jobs(fn: Callable[[T], R], jobs: Sequence[T], workers: int = 1) -> list[R]:
    """`fn` debe ser una función de módulo (picklable). workers <= 1 ejecuta en línea."""

    workers = max(1, min(int(workers), len(jobs) or 1))
    if workers == 1:
        return [fn(job) for job in jobs]
    _logger.info("lanzando %d tareas en %d procesos", len(jobs), workers)
    with ProcessPoolExecutor(max_workers=workers) as ex:
        return list(ex.map(fn, jobs))
