"""Numba switch.

Hot kernels are written twice: an explicit-loop version compiled with
``numba.njit`` and a vectorised numpy version.  Setting the environment
variable ``HEISENBERG_IET_PURE_NUMPY=1`` (or running without numba installed)
selects the numpy versions everywhere.  The flag is read once at import.
"""

from __future__ import annotations

import os

ENV_FLAG = "HEISENBERG_IET_PURE_NUMPY"

try:  # pragma: no cover - exercised implicitly
    import numba
except ImportError:  # pragma: no cover
    numba = None


def _flag_set() -> bool:
    return os.environ.get(ENV_FLAG, "").strip().lower() in {"1", "true", "yes", "on"}


if numba is not None:
    # the bundled TBB is too old for numba and only produces a warning
    numba.config.THREADING_LAYER_PRIORITY = ["omp", "workqueue", "tbb"]

HAVE_NUMBA = numba is not None
USE_NUMBA = HAVE_NUMBA and not _flag_set()


def njit(*args, **kwargs):
    """``numba.njit`` when numba is importable, otherwise a no-op decorator."""
    if numba is None:
        if len(args) == 1 and callable(args[0]) and not kwargs:
            return args[0]
        return lambda fn: fn
    kwargs.setdefault("cache", True)
    return numba.njit(*args, **kwargs)


if numba is not None:
    prange = numba.prange
else:  # pragma: no cover
    prange = range


def set_threads(n: int | None) -> int:
    """Cap the numba worker pool; returns the effective count (1 without numba)."""
    if numba is None:
        return 1
    limit = numba.config.NUMBA_NUM_THREADS
    if n is None:
        return numba.get_num_threads()
    n = max(1, min(int(n), limit))
    numba.set_num_threads(n)
    return n


def backend_name() -> str:
    return "numba" if USE_NUMBA else "numpy"
