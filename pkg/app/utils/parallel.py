import logging
from multiprocessing import Pool
from typing import Callable, Iterable, List

logger = logging.getLogger(__name__)


class _Bound:
    """Picklable fn(index, *args)."""

    def __init__(self, fn: Callable, args: tuple):
        self.fn = fn
        self.args = args

    def __call__(self, index: int):
        return self.fn(index, *self.args)


class RealizationPool:
    """
    Maps a realization function over realization indices.

    Each realization draws from its own stream keyed by its index, so the
    merged result (ordered by index) does not depend on the worker count.
    """

    def __init__(self, workers: int = 1):
        self.workers = max(1, int(workers))

    def map(self, fn: Callable, indices: Iterable[int], *args) -> List:
        task = _Bound(fn, args)
        indices = list(indices)
        if self.workers == 1 or len(indices) <= 1:
            return [task(i) for i in indices]
        logger.debug("running %d realizations on %d workers", len(indices), self.workers)
        with Pool(processes=min(self.workers, len(indices))) as pool:
            return pool.map(task, indices)
