"""
Backend selection for the numeric kernels.

Every hot kernel in the package is written once, in the subset of NumPy that
numba understands. With numba available the kernels are compiled with
``numba.njit``; setting ``WWA_DISABLE_NUMBA=1`` (or running without numba)
leaves them as plain Python/NumPy functions. Both backends draw from the
legacy Mersenne Twister stream through the same primitives, so a fixed seed
yields the same chain on either path.
"""

import os

# Must be set before numba is imported. Allows --threads > cores and avoids
# probing an incompatible TBB.
os.environ.setdefault("NUMBA_NUM_THREADS", str(max(os.cpu_count() or 1, 8)))
os.environ.setdefault("NUMBA_THREADING_LAYER", "workqueue")

_disabled = os.environ.get("WWA_DISABLE_NUMBA", "").strip().lower() not in (
    "", "0", "false", "no"
)

try:
    if _disabled:
        raise ImportError
    import numba
except ImportError:
    numba = None

USE_NUMBA = numba is not None
BACKEND = "numba" if USE_NUMBA else "numpy"


def njit(f=None, **options):
    """``numba.njit(cache=True)`` or the identity, depending on the backend."""
    options.setdefault("cache", True)

    if not USE_NUMBA:
        return (lambda g: g) if f is None else f

    if f is None:
        return lambda g: numba.njit(g, **options)

    return numba.njit(f, **options)


if USE_NUMBA:
    prange = numba.prange
else:
    prange = range


def set_threads(n):
    """Size of the worker pool used by parallel kernels (no-op without numba)."""
    if USE_NUMBA:
        numba.set_num_threads(max(1, min(int(n), numba.config.NUMBA_NUM_THREADS)))


def get_threads():
    return numba.get_num_threads() if USE_NUMBA else 1
