"""
Timing of single G-Wishart draws with and without graph decomposition.

The rate matrix is D = I + 100 inv(A) with A the cycle precision pattern
(unit diagonal, 0.5 on the first off-diagonals, 0.4 in the corners), and
delta = 3.
"""

import time

import numpy as np

from .data import cycle_precision, gen_bench_graph
from .graph import atom_decomposition
from .gwishart import DECOMPOSITION_MODES, GWishartParams, SamplerConfig, rgwish_into
from ._random import seed_from

BENCH_COLUMNS = ("kind", "p", "rep", "decomposition", "nanos", "largest_prime_fraction")


def bench_rate_matrix(p):
    return np.eye(p) + 100.0 * np.linalg.inv(cycle_precision(p))


def largest_prime_fraction(G):
    """Share of the nodes lying in the largest atom of the decomposition."""
    return atom_decomposition(G).largest_atom_size() / G.p


def bench_rgwish(kind, p_list, reps, decompositions=("on", "off"), seed=0, delta=3.0, new_graph_per_rep=True):
    """
    Rows (kind, p, rep, decomposition, nanos, largest_prime_fraction), one
    timed draw per rep and decomposition setting. Random graph kinds get a
    fresh graph for every rep; both settings time the same graph.
    """
    rng = np.random.default_rng(seed)
    rows = []

    for p in p_list:
        params = GWishartParams(delta, bench_rate_matrix(p))
        cfg = SamplerConfig()
        K = np.empty((p, p))
        G = gen_bench_graph(kind, p, rng)

        for rep in range(reps):
            if rep and new_graph_per_rep:
                G = gen_bench_graph(kind, p, rng)

            frac = largest_prime_fraction(G)
            adj = np.ascontiguousarray(G.adj)

            for dec in decompositions:
                mode = DECOMPOSITION_MODES["enabled" if dec == "on" else "disabled"]
                seed_from(rng)
                t0 = time.perf_counter_ns()
                status, _ = rgwish_into(adj, params.delta, params.D, cfg.tol, cfg.max_sweeps, mode, K)
                t1 = time.perf_counter_ns()

                if status != 0:
                    raise RuntimeError("G-Wishart draw failed (status %d) at p=%d rep=%d" % (status, p, rep))

                rows.append((kind, p, rep, dec, t1 - t0, frac))

    return rows


def warm_up():
    """Compile the sampling kernels so the first timed draw is not skewed."""
    bench_rgwish("chorded-cycle", [6], 1)
    bench_rgwish("er:0.5", [6], 1)
