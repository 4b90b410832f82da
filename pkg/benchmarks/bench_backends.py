"""
Compare the compiled kernels with the pure NumPy fallback.

Each backend runs in its own interpreter (the backend is fixed at import
time by WWA_DISABLE_NUMBA). Workloads are timed after one warm-up call, so
compilation is excluded from the numba figures. The script also checks that
both backends produce the same chain for the same seed.

    python benchmarks/bench_backends.py            # full table
    python benchmarks/bench_backends.py --quick    # smaller workloads
"""

import argparse
import hashlib
import json
import os
import subprocess
import sys
import time


def _workloads(quick):
    import numpy as np

    from wwa import kernels as kn
    from wwa.data import gen_cycle_dataset
    from wwa.graph import Graph, all_pairs
    from wwa.gwishart import GWishartParams, SamplerConfig, sample_decomposed, sample_direct
    from wwa.linalg import pd_inverse, wishart_complete_draw
    from wwa.mcmc import ChainConfig, Model, run_chain

    scale = 1 if quick else 5
    p = 10
    D = np.eye(p)
    params = GWishartParams(3.0, D)
    cfg = SamplerConfig()
    rng = np.random.default_rng(0)
    cycle = Graph.cycle(p)
    ds = gen_cycle_dataset(6, np.random.default_rng(1))
    model = Model.from_data(ds.Y)

    K = sample_direct(cycle, params, cfg, rng)
    S = pd_inverse(K)
    adj = np.array(cycle.adj)
    pi, pj = all_pairs(p)
    logw = np.empty(len(pi))
    lrh = np.empty(len(pi))
    tab = kn.approx_table(3.0, p, "mohammadi")

    def scan():
        kn.scan(adj, K, S, D, 0.0, tab, pi, pj, cycle.n_edges, False, logw, lrh)

    def chain(algo):
        def run():
            run_chain(ChainConfig(algorithm=algo, iterations=20 * scale, seed=3), model)

        return run

    return {
        "bartlett p=10": (lambda: wishart_complete_draw(3.0, D, rng), 20 * scale),
        "direct draw cycle p=10": (lambda: sample_direct(cycle, params, cfg, rng), 4 * scale),
        "decomposed draw cycle p=10": (lambda: sample_decomposed(cycle, params, cfg, rng), 4 * scale),
        "neighbourhood scan p=10": (scan, 20 * scale),
        "wwa chain p=6": (chain("wwa"), 1),
        "dcbf chain p=6": (chain("dcbf"), 1),
    }


def _chain_digest():
    import numpy as np

    from wwa.data import gen_cycle_dataset
    from wwa.mcmc import ChainConfig, Model, run_chain

    ds = gen_cycle_dataset(5, np.random.default_rng(2))
    out = {}

    for algo in ("wwa", "dcbf", "cl"):
        tr = run_chain(ChainConfig(algorithm=algo, iterations=30, seed=11), Model.from_data(ds.Y))
        out[algo] = hashlib.sha256("".join(tr.hex_rows()).encode()).hexdigest()[:16]

    return out


def child(quick):
    from wwa import BACKEND

    results = {}

    for name, (fn, reps) in _workloads(quick).items():
        fn()
        t0 = time.perf_counter()

        for _ in range(reps):
            fn()

        results[name] = (time.perf_counter() - t0) / reps

    json.dump({"backend": BACKEND, "seconds": results, "digest": _chain_digest()}, sys.stdout)


def run_backend(disable, quick):
    env = dict(os.environ, WWA_DISABLE_NUMBA="1" if disable else "0")
    cmd = [sys.executable, os.path.abspath(__file__), "--child"] + (["--quick"] if quick else [])
    out = subprocess.run(cmd, env=env, check=True, capture_output=True, text=True)
    return json.loads(out.stdout)


def main():
    ap = argparse.ArgumentParser(description=__doc__.strip().splitlines()[0])
    ap.add_argument("--quick", action="store_true")
    ap.add_argument("--child", action="store_true", help=argparse.SUPPRESS)
    args = ap.parse_args()

    if args.child:
        child(args.quick)
        return 0

    fast = run_backend(False, args.quick)
    slow = run_backend(True, args.quick)
    print("%-28s %14s %14s %9s" % ("workload", fast["backend"], slow["backend"], "speedup"))

    for name, t_fast in fast["seconds"].items():
        t_slow = slow["seconds"][name]
        print("%-28s %12.1f us %12.1f us %8.1fx" % (name, t_fast * 1e6, t_slow * 1e6, t_slow / t_fast))

    same = fast["digest"] == slow["digest"]
    print("identical chains across backends: %s" % ("yes" if same else "NO"))
    return 0 if same else 1


if __name__ == "__main__":
    sys.exit(main())
