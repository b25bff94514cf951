"""Process-based worker pool for concurrent propagator evaluations.

Fine-model evaluations are pure CPU-bound Python, so real concurrency needs
processes rather than threads.  Results are gathered by task index, which
keeps every computation bit-identical to a serial run regardless of pool
size or scheduling.
"""

from __future__ import annotations

import atexit
from concurrent.futures import ProcessPoolExecutor


def _call(fn, args):
    return fn(*args)


class WorkerPool:
    """Fixed-size process pool with order-preserving map helpers.

    ``size == 1`` runs everything inline in the calling process.
    """

    def __init__(self, size: int):
        if size < 1:
            raise ValueError("pool size must be at least 1")
        self.size = size
        self._executor = ProcessPoolExecutor(max_workers=size) if size > 1 else None

    def starmap(self, fn, args_list):
        """Apply fn(*args) for each argument tuple; results in input order."""
        if self._executor is None:
            return [fn(*args) for args in args_list]
        futures = [self._executor.submit(_call, fn, args) for args in args_list]
        return [f.result() for f in futures]

    def warm_up(self) -> None:
        """Spin up worker processes ahead of timing-sensitive use."""
        if self._executor is not None:
            self.starmap(_noop, [() for _ in range(self.size)])

    def shutdown(self) -> None:
        if self._executor is not None:
            self._executor.shutdown()
            self._executor = None


def _noop():
    return None


_pools: dict[int, WorkerPool] = {}


def get_pool(size: int) -> WorkerPool:
    """Shared pools keyed by size; created lazily, shut down at exit."""
    if size not in _pools:
        _pools[size] = WorkerPool(size)
    return _pools[size]


@atexit.register
def _shutdown_all() -> None:
    for pool in _pools.values():
        pool.shutdown()
    _pools.clear()
