"""
Random primitives shared by all kernels.

Only ``np.random.random`` and ``np.random.standard_normal`` are used directly:
numba reproduces NumPy's legacy stream for those two, but not for its gamma
or chi-square samplers. Everything else is built on top of them.
"""

import math

import numpy as np

from ._jit import njit


@njit
def seed_kernel(seed):
    np.random.seed(seed)


def seed_from(rng):
    """Seed the kernel stream from a ``numpy.random.Generator``."""
    seed_kernel(int(rng.integers(0, 2**32 - 1)))


@njit
def uniform():
    return np.random.random()


@njit
def normal():
    return np.random.standard_normal()


@njit
def randint(n):
    k = int(np.random.random() * n)
    return k if k < n else n - 1


@njit
def gamma(shape):
    """Unit-rate gamma draw (Marsaglia & Tsang squeeze method)."""
    boost = 1.0

    if shape < 1.0:
        boost = np.random.random() ** (1.0 / shape)
        shape += 1.0

    d = shape - 1.0 / 3.0
    c = 1.0 / math.sqrt(9.0 * d)

    while True:
        x = np.random.standard_normal()
        v = 1.0 + c * x

        if v <= 0.0:
            continue

        v = v * v * v
        u = np.random.random()

        if u < 1.0 - 0.0331 * x**4:
            return boost * d * v

        if math.log(u) < 0.5 * x * x + d * (1.0 - v + math.log(v)):
            return boost * d * v


@njit
def chisq(df):
    return 2.0 * gamma(0.5 * df)
