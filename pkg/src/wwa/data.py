"""
Synthetic datasets for graph-structure experiments, multivariate normal
draws from a precision matrix, CSV ingestion and quantile normalisation.

A dataset with a known truth is stored as three files: the data CSV, an
edge list ``<stem>.truth.edges`` (1-based ``i j`` per line) and the dense
precision matrix ``<stem>.truth.K.csv``.
"""

import csv
import io
import os
from dataclasses import dataclass
from importlib import resources

import numpy as np
from scipy.linalg import solve_triangular
from scipy.stats import norm, rankdata

from .diagnostics import write_matrix_csv
from .graph import Graph
from .gwishart import GWishartParams, SamplerConfig, sample_decomposed
from .linalg import cholesky_upper
from .trace import atomic_write

IRIS_COLUMNS = ("sepal_length", "sepal_width", "petal_length", "petal_width")


@dataclass
class Dataset:
    Y: np.ndarray
    graph: Graph = None
    K_true: np.ndarray = None
    columns: tuple = None

    def __post_init__(self):
        self.Y = np.atleast_2d(np.asarray(self.Y, dtype=np.float64))

        if self.Y.shape[0] < 1:
            raise ValueError("dataset needs at least one row")

    @property
    def n(self):
        return self.Y.shape[0]

    @property
    def p(self):
        return self.Y.shape[1]

    @property
    def has_truth(self):
        return self.graph is not None and self.K_true is not None


def _rng(rng):
    return rng if isinstance(rng, np.random.Generator) else np.random.default_rng(rng)


def cycle_precision(p):
    """K_ii = 1, K_{i,i+1} = 0.5 and K_{1p} = 0.4, zero elsewhere."""
    if p < 3:
        raise ValueError("cycle data needs p >= 3")

    K = np.eye(p)
    idx = np.arange(p - 1)
    K[idx, idx + 1] = K[idx + 1, idx] = 0.5
    K[0, p - 1] = K[p - 1, 0] = 0.4
    return K


def mvn_sample(n, K, rng=None):
    """n rows from N(0, inv(K)) via the Cholesky factor of K (no inverse)."""
    K = np.asarray(K, dtype=np.float64)
    U = cholesky_upper(K)
    Z = _rng(rng).standard_normal((K.shape[0], int(n)))
    # K = U'U, so x = inv(U) z has covariance inv(K).
    return solve_triangular(U, Z, lower=False).T


def gen_cycle_dataset(p, rng=None):
    """Cycle-graph precision with floor(3p/2) observations."""
    K = cycle_precision(p)
    Y = mvn_sample(3 * p // 2, K, rng)
    return Dataset(Y, Graph.cycle(p), K)


def gen_model_dataset(p, delta=3.0, rng=None):
    """G from the uniform graph prior, K ~ W_G(delta, I), 2p observations."""
    if p < 2:
        raise ValueError("need p >= 2")

    rng = _rng(rng)
    bits = rng.random(p * (p - 1) // 2) < 0.5
    G = Graph.from_bits(p, bits)
    K = sample_decomposed(G, GWishartParams(delta, np.eye(p)), SamplerConfig(), rng)
    return Dataset(mvn_sample(2 * p, K, rng), G, K)


def parse_graph_kind(kind):
    """``chorded-cycle`` -> ("chorded-cycle", None); ``er:0.5`` -> ("er", 0.5)."""
    kind = str(kind).strip().lower()

    if kind == "chorded-cycle":
        return kind, None

    if kind.startswith("er:"):
        try:
            rho = float(kind[3:])
        except ValueError:
            raise ValueError("bad edge probability in %r" % kind) from None

        if not 0.0 <= rho <= 1.0:
            raise ValueError("edge probability must lie in [0, 1]")

        return "er", rho

    raise ValueError("graph kind must be 'chorded-cycle' or 'er:<rho>'")


def chorded_cycle(p):
    """Cycle 1..p plus the chords (1, i) for i = 3..p-1: 2p - 3 edges."""
    if p < 4:
        raise ValueError("chorded cycle needs p >= 4")

    edges = [(i, i + 1) for i in range(p - 1)] + [(0, p - 1)]
    edges += [(0, i) for i in range(2, p - 1)]
    return Graph.from_edges(p, edges)


def gen_bench_graph(kind, p, rng=None):
    name, rho = parse_graph_kind(kind)

    if name == "chorded-cycle":
        return chorded_cycle(p)

    if p < 1:
        raise ValueError("need p >= 1")

    bits = _rng(rng).random(p * (p - 1) // 2) < rho
    return Graph.from_bits(p, bits)


def quantile_normalize(X):
    """
    Map each column to standard-normal scores at (rank - 0.5) / n, ties
    sharing their average rank.
    """
    X = np.asarray(X, dtype=np.float64)
    squeeze = X.ndim == 1
    X = X.reshape(len(X), -1)
    n = X.shape[0]

    if n < 2:
        raise ValueError("quantile normalisation needs at least 2 rows")

    ranks = rankdata(X, method="average", axis=0)
    out = norm.ppf((ranks - 0.5) / n)
    return out.ravel() if squeeze else out


def _is_number(text):
    try:
        float(text)
    except ValueError:
        return False

    return True


def parse_matrix_csv(text, name="<data>"):
    """Numeric CSV with an optional single header row. Returns (matrix, header)."""
    rows = [r for r in csv.reader(io.StringIO(text)) if r and any(c.strip() for c in r)]

    if not rows:
        raise ValueError("%s: no data" % name)

    header = None

    if not all(_is_number(c.strip()) for c in rows[0]):
        header = tuple(c.strip() for c in rows[0])
        rows = rows[1:]

        if not rows:
            raise ValueError("%s: header but no data rows" % name)

    width = len(rows[0]) if header is None else len(header)
    offset = 1 if header is None else 2
    out = np.empty((len(rows), width))

    for r, row in enumerate(rows):
        if len(row) != width:
            raise ValueError("%s: row %d has %d fields, expected %d" % (name, r + offset, len(row), width))

        for c, cell in enumerate(row):
            try:
                out[r, c] = float(cell)
            except ValueError:
                raise ValueError(
                    "%s: non-numeric value %r at row %d, column %d" % (name, cell, r + offset, c + 1)
                ) from None

    return out, header


def load_matrix_csv(path, demean=False):
    with open(path, newline="") as fh:
        Y, header = parse_matrix_csv(fh.read(), os.fspath(path))

    if demean:
        Y = Y - Y.mean(axis=0)

    return Dataset(Y, columns=header)


def truth_paths(data_path):
    stem = os.fspath(data_path)

    if stem.endswith(".csv"):
        stem = stem[:-4]

    return stem + ".truth.edges", stem + ".truth.K.csv"


def save_dataset(ds, path):
    """Data CSV plus, when the truth is known, the two sidecar files."""
    atomic_write(path, "".join(",".join("%.17g" % v for v in row) + "\n" for row in ds.Y))

    if ds.has_truth:
        edges_path, k_path = truth_paths(path)
        atomic_write(edges_path, "# p=%d\n" % ds.graph.p + ds.graph.to_edge_list())
        write_matrix_csv(k_path, ds.K_true)


def load_truth(data_path=None, edges_path=None, k_path=None):
    """Read the truth sidecar of a data file (or explicit paths). Returns (Graph, K)."""
    if data_path is not None:
        edges_path, k_path = truth_paths(data_path)

    with open(k_path, newline="") as fh:
        K, _ = parse_matrix_csv(fh.read(), k_path)

    if K.shape[0] != K.shape[1]:
        raise ValueError("%s: precision matrix is not square" % k_path)

    with open(edges_path) as fh:
        G = Graph.from_edge_list(K.shape[0], fh.read())

    return G, K


def iris_virginica():
    """The 50 Iris virginica flowers (cm), columns as in ``IRIS_COLUMNS``."""
    text = resources.files("wwa").joinpath("fixtures/iris_virginica.csv").read_text()
    Y, header = parse_matrix_csv(text, "iris_virginica.csv")
    return Dataset(Y, columns=header)
