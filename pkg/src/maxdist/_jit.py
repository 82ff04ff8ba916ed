"""Optional numba acceleration.

Set ``MAXDIST_DISABLE_NUMBA=1`` to force the pure-numpy code paths, and
``MAXDIST_THREADS`` to cap the number of numba worker threads.
"""
from __future__ import annotations

import os

_disabled = os.environ.get("MAXDIST_DISABLE_NUMBA", "").strip().lower() in {"1", "true", "yes", "on"}

try:
    if _disabled:
        raise ImportError("numba disabled by MAXDIST_DISABLE_NUMBA")
    import numba
    from numba import prange

    USING_NUMBA = True
    # prefer OpenMP so an outdated TBB is never probed
    numba.config.THREADING_LAYER_PRIORITY = ["omp", "workqueue", "tbb"]

    def njit(*args, **kwargs):
        kwargs.setdefault("cache", True)
        kwargs.setdefault("nogil", True)
        return numba.njit(*args, **kwargs)

    _threads = os.environ.get("MAXDIST_THREADS")
    if _threads:
        numba.set_num_threads(max(1, min(int(_threads), numba.config.NUMBA_NUM_THREADS)))

except ImportError:
    USING_NUMBA = False
    prange = range

    def njit(*args, **kwargs):
        if len(args) == 1 and callable(args[0]) and not kwargs:
            return args[0]
        return lambda f: f
