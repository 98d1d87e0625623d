"""Process-wide thread control for the numba kernels and BLAS."""

from __future__ import annotations

import os

import numba
from threadpoolctl import threadpool_limits

from . import graph

_limiter = None


def set_threads(n: int | None) -> int:
    """Cap all internal parallelism at ``n`` threads; 1 selects the sequential kernels."""
    global _limiter
    if n is None or n < 1:
        n = os.cpu_count() or 1
    numba.set_num_threads(max(1, min(n, numba.config.NUMBA_NUM_THREADS)))
    _limiter = threadpool_limits(limits=n)
    graph.set_parallel(n > 1)
    return n
