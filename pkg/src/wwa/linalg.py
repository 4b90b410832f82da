"""
Dense symmetric-matrix primitives: upper Cholesky factors, positive-definite
inversion, symmetric permutation and Bartlett draws from the Wishart
distribution.

The Wishart convention throughout is the G-Wishart one with the graph
complete: density proportional to ``|K|^(delta/2 - 1) exp(-tr(K D)/2)``,
i.e. a standard Wishart with ``delta + p - 1`` degrees of freedom and scale
``inv(D)``.
"""

import math

import numpy as np

from ._jit import njit
from ._random import chisq, normal, seed_from

PD_TOL = 1e-12


class NotPositiveDefiniteError(np.linalg.LinAlgError):
    """Cholesky factorisation failed at a leading minor."""

    def __init__(self, minor):
        self.minor = minor
        super().__init__("matrix is not positive definite (leading minor %d)" % minor)


@njit
def chol_upper_into(A, U):
    """
    Write U with U.T @ U == A. Returns -1 on success or the 0-based index
    of the failing leading minor.
    """
    p = A.shape[0]

    for j in range(p):
        s = A[j, j]

        for k in range(j):
            s -= U[k, j] * U[k, j]

        if not s > PD_TOL * PD_TOL:
            return j

        d = math.sqrt(s)
        U[j, j] = d

        for i in range(j + 1, p):
            t = A[j, i]

            for k in range(j):
                t -= U[k, j] * U[k, i]

            U[j, i] = t / d
            U[i, j] = 0.0

    return -1


@njit
def upper_inv_into(U, T):
    """Inverse of an upper-triangular matrix."""
    p = U.shape[0]

    for j in range(p):
        T[j, j] = 1.0 / U[j, j]

        for i in range(j - 1, -1, -1):
            s = 0.0

            for k in range(i + 1, j + 1):
                s += U[i, k] * T[k, j]

            T[i, j] = -s / U[i, i]

        for i in range(j + 1, p):
            T[i, j] = 0.0


@njit
def inv_pd_into(A, out, U, T):
    """
    Inverse of a PD matrix through its Cholesky factor; U and T are p x p
    scratch buffers. Returns the Cholesky status (-1 on success).
    """
    status = chol_upper_into(A, U)

    if status >= 0:
        return status

    upper_inv_into(U, T)
    p = A.shape[0]

    # inv(A) = T @ T.T with T upper-triangular.
    for i in range(p):
        for j in range(i, p):
            s = 0.0

            for k in range(j, p):
                s += T[i, k] * T[j, k]

            out[i, j] = s
            out[j, i] = s

    return -1


@njit
def inv_pd(A):
    p = A.shape[0]
    out = np.empty((p, p))
    U = np.zeros((p, p))
    T = np.zeros((p, p))
    status = inv_pd_into(A, out, U, T)
    return out, status


@njit
def solve_pd_into(A, b, x, U):
    """Solve A x = b for PD A (vector b); returns the Cholesky status."""
    status = chol_upper_into(A, U)

    if status >= 0:
        return status

    n = A.shape[0]

    # U.T y = b, then U x = y.
    for i in range(n):
        s = b[i]

        for k in range(i):
            s -= U[k, i] * x[k]

        x[i] = s / U[i, i]

    for i in range(n - 1, -1, -1):
        s = x[i]

        for k in range(i + 1, n):
            s -= U[i, k] * x[k]

        x[i] = s / U[i, i]

    return -1


@njit
def bartlett_into(delta, D, out):
    """
    Complete-graph Wishart draw with rate D written into ``out``.
    Returns the Cholesky status of D.
    """
    k = D.shape[0]
    U = np.zeros((k, k))
    status = chol_upper_into(D, U)

    if status >= 0:
        return status

    T = np.zeros((k, k))
    upper_inv_into(U, T)
    nu = delta + k - 1.0
    A = np.zeros((k, k))

    for i in range(k):
        A[i, i] = math.sqrt(chisq(nu - i))

        for j in range(i):
            A[i, j] = normal()

    # M = T @ A (upper times lower), out = M @ M.T
    M = np.zeros((k, k))

    for i in range(k):
        for j in range(k):
            s = 0.0

            for m in range(max(i, j), k):
                s += T[i, m] * A[m, j]

            M[i, j] = s

    for i in range(k):
        for j in range(i, k):
            s = 0.0

            for m in range(k):
                s += M[i, m] * M[j, m]

            out[i, j] = s
            out[j, i] = s

    return -1


def _as_square(A):
    A = np.ascontiguousarray(A, dtype=np.float64)

    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise ValueError("expected a square matrix")

    return A


def cholesky_upper(A):
    """Upper-triangular Phi with ``Phi.T @ Phi == A``."""
    A = _as_square(A)
    U = np.zeros_like(A)
    status = chol_upper_into(A, U)

    if status >= 0:
        raise NotPositiveDefiniteError(status + 1)

    return U


def logdet_pd(A):
    """log |A| from the Cholesky diagonal."""
    return 2.0 * float(np.sum(np.log(np.diag(cholesky_upper(A)))))


def pd_inverse(A):
    A = _as_square(A)
    out, status = inv_pd(A)

    if status >= 0:
        raise NotPositiveDefiniteError(status + 1)

    return out


def permute_symmetric(A, perm):
    """``B[perm[i], perm[j]] = A[i, j]``."""
    A = _as_square(A)
    perm = np.asarray(perm, dtype=np.int64)

    if sorted(perm.tolist()) != list(range(A.shape[0])):
        raise ValueError("perm is not a permutation of 0..p-1")

    B = np.empty_like(A)
    B[np.ix_(perm, perm)] = A
    return B


def wishart_complete_draw(delta, D, rng):
    """Draw K with density proportional to ``|K|^(delta/2-1) exp(-tr(K D)/2)``."""
    D = _as_square(D)

    if not delta > 2:
        raise ValueError("degrees of freedom must exceed 2")

    out = np.empty_like(D)
    seed_from(rng)
    status = bartlett_into(float(delta), D, out)

    if status >= 0:
        raise NotPositiveDefiniteError(status + 1)

    return out
