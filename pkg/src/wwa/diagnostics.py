"""
Trace post-processing: integrated autocorrelation time, effective sample
size, cost of an independent sample, edge-inclusion probabilities,
precision-matrix accuracy and a split R-hat.

Everything is computed on the recorded (post burn-in) part of a trace, and
the autocorrelation-based quantities on its |E| series.
"""

import json
import math
import warnings
from dataclasses import dataclass

import numpy as np
from scipy.linalg import cho_solve

from .linalg import cholesky_upper
from .trace import atomic_write

MIN_IACT_LENGTH = 100


class DegenerateSeriesWarning(UserWarning):
    """A constant series has no autocorrelation; its IACT is taken as 1."""


def autocorrelation(x):
    """Sample autocorrelation of a centred series at all lags (FFT, biased)."""
    x = np.asarray(x, dtype=np.float64)
    n = len(x)
    y = x - x.mean()
    size = 1 << (2 * n - 1).bit_length()
    f = np.fft.rfft(y, size)
    acov = np.fft.irfft(f * np.conj(f), size)[:n] / n
    return acov / acov[0]


def iact_with_flag(x):
    """
    Geyer's initial monotone sequence estimate of the integrated
    autocorrelation time. Returns (tau, degenerate) where ``degenerate`` is
    True for a constant series (tau = 1).
    """
    x = np.asarray(x, dtype=np.float64).ravel()

    if len(x) < MIN_IACT_LENGTH:
        raise ValueError("IACT needs at least %d values, got %d" % (MIN_IACT_LENGTH, len(x)))

    if not np.all(np.isfinite(x)):
        raise ValueError("series contains non-finite values")

    if np.ptp(x) == 0.0:
        return 1.0, True

    rho = autocorrelation(x)
    n_pairs = len(rho) // 2
    pairs = rho[: 2 * n_pairs].reshape(n_pairs, 2).sum(axis=1)

    # Initial positive sequence, then made monotone non-increasing.
    stop = np.flatnonzero(pairs <= 0.0)
    pairs = pairs[: stop[0]] if len(stop) else pairs
    pairs = np.minimum.accumulate(pairs)

    return float(-1.0 + 2.0 * pairs.sum()), False


def iact(x):
    """Integrated autocorrelation time; warns and returns 1 for a constant series."""
    tau, degenerate = iact_with_flag(x)

    if degenerate:
        warnings.warn("constant series: IACT set to 1", DegenerateSeriesWarning, stacklevel=2)

    return tau


def ess(x):
    return len(np.asarray(x).ravel()) / iact(x)


def cost_independent_sample(trace):
    """IACT of the |E| series times the mean wall time per iteration, in seconds."""
    rec = trace.recorded()

    if rec.nanos is None or len(rec.nanos) == 0:
        raise ValueError("trace has no timings")

    return iact(rec.n_edges) * float(np.mean(rec.nanos)) * 1e-9


def inclusion_probabilities(trace):
    """Fraction of recorded iterations containing each edge, as a p x p matrix."""
    rec = trace.recorded()

    if len(rec) == 0:
        raise ValueError("trace has no recorded iterations")

    freq = rec.edge_matrix().mean(axis=0)
    p = rec.p
    out = np.zeros((p, p))
    iu = np.triu_indices(p, 1)
    out[iu] = freq
    return out + out.T


def precision_summaries(k_hat, K_true):
    """
    (KL, Frobenius) of an estimate against the true precision matrix.
    ``k_hat`` may be a single matrix or a stack of draws, which is averaged.
    KL is the divergence of N(0, inv(k_hat)) from N(0, inv(K_true)).
    """
    k_hat = np.asarray(k_hat, dtype=np.float64)
    K_true = np.asarray(K_true, dtype=np.float64)

    if k_hat.ndim == 3:
        k_hat = k_hat.mean(axis=0)

    if k_hat.shape != K_true.shape:
        raise ValueError("shape mismatch: %s vs %s" % (k_hat.shape, K_true.shape))

    p = K_true.shape[0]
    U_true = cholesky_upper(K_true)
    U_hat = cholesky_upper(k_hat)
    trace_term = np.trace(cho_solve((U_true, False), k_hat))
    logdet_hat = 2.0 * np.sum(np.log(np.diag(U_hat)))
    logdet_true = 2.0 * np.sum(np.log(np.diag(U_true)))
    kl = 0.5 * (trace_term - p - (logdet_hat - logdet_true))
    frob = float(np.linalg.norm(k_hat - K_true, "fro"))
    return max(float(kl), 0.0), frob


def split_rhat(chains):
    """
    Potential scale reduction with every chain split in half (not the
    rank-normalised version). ``chains`` is one series or a 2-d array with
    one chain per row.
    """
    x = np.atleast_2d(np.asarray(chains, dtype=np.float64))
    half = x.shape[1] // 2

    if half < 2:
        raise ValueError("split R-hat needs at least 4 draws per chain")

    parts = np.vstack([x[:, :half], x[:, half : 2 * half]])
    W = parts.var(axis=1, ddof=1).mean()
    B_over_n = parts.mean(axis=1).var(ddof=1)

    if W == 0.0:
        return 1.0 if B_over_n == 0.0 else math.inf

    var_plus = (half - 1) / half * W + B_over_n
    return float(math.sqrt(var_plus / W))


@dataclass
class DiagnosticsReport:
    iact: float
    ess: float
    cost_independent_sample: float
    inclusion: np.ndarray
    k_hat: np.ndarray = None
    kl: float = None
    frobenius: float = None
    split_rhat: float = None
    warnings: tuple = ()

    def to_dict(self):
        out = {
            "iact": self.iact,
            "ess": self.ess,
            "cis_seconds": self.cost_independent_sample,
            "inclusion": self.inclusion.ravel().tolist(),
            "p": int(self.inclusion.shape[0]),
        }

        # Measures without inputs are left out rather than zero-filled.
        for key in ("kl", "frobenius", "split_rhat"):
            value = getattr(self, key)

            if value is not None:
                out[key] = value

        if self.warnings:
            out["warnings"] = list(self.warnings)

        return out

    def to_json(self, path=None):
        text = json.dumps(self.to_dict(), indent=2) + "\n"

        if path is not None:
            atomic_write(path, text)

        return text


def diagnose(trace, K_true=None, k_hat=None):
    """All summaries whose inputs are available for one trace."""
    rec = trace.recorded()
    tau, degenerate = iact_with_flag(rec.n_edges)
    notes = ("n_edges series is constant; IACT set to 1",) if degenerate else ()
    cis = tau * float(np.mean(rec.nanos)) * 1e-9
    k_hat = trace.k_hat if k_hat is None else k_hat
    kl = frob = None

    if K_true is not None and k_hat is not None:
        kl, frob = precision_summaries(k_hat, K_true)

    return DiagnosticsReport(
        iact=tau,
        ess=len(rec) / tau,
        cost_independent_sample=cis,
        inclusion=inclusion_probabilities(trace),
        k_hat=None if k_hat is None else np.asarray(k_hat),
        kl=kl,
        frobenius=frob,
        split_rhat=split_rhat(rec.n_edges),
        warnings=notes,
    )


def write_matrix_csv(path, A, fmt="%.17g"):
    """Dense matrix as comma-separated rows, written atomically."""
    A = np.atleast_2d(np.asarray(A, dtype=np.float64))
    text = "\n".join(",".join(fmt % v for v in row) for row in A) + "\n"
    atomic_write(path, text)
