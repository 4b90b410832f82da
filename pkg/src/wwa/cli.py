"""
Command-line entry point.

    wwa simulate-data --kind cycle --p 10 --seed 1 --out d.csv
    wwa run --algo wwa --data d.csv --iters 10000 --seed 7 --out-trace t.csv
    wwa diagnose --trace t.csv --truth d.truth.K.csv --khat k.csv --out report.json
    wwa bench-gwishart --graph-kind chorded-cycle --p-list 20,40 --decomposition on

Exit status: 0 on success, 2 for invalid arguments or inputs, 1 when a
computation fails.
"""

import argparse
import csv
import datetime
import hashlib
import io
import json
import os
import sys

import numpy as np

from . import __version__
from ._jit import BACKEND
from .bench import BENCH_COLUMNS, bench_rgwish, warm_up
from .data import (
    gen_bench_graph,
    gen_cycle_dataset,
    gen_model_dataset,
    load_matrix_csv,
    load_truth,
    parse_graph_kind,
    parse_matrix_csv,
    save_dataset,
    truth_paths,
)
from .diagnostics import diagnose, write_matrix_csv
from .graph import Graph, GraphPrior
from .gwishart import GWishartError, SamplerConfig
from .mcmc import ALGORITHMS, ChainConfig, ConfigError, Model, run_chain
from .trace import Trace, atomic_write

EXIT_OK = 0
EXIT_RUNTIME = 1
EXIT_CONFIG = 2


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        sys.stderr.write("%s: error: %s\n" % (self.prog, message))
        raise SystemExit(EXIT_CONFIG)


def _now():
    return datetime.datetime.now(datetime.timezone.utc).isoformat()


def _sha256(path):
    h = hashlib.sha256()

    with open(path, "rb") as fh:
        for block in iter(lambda: fh.read(1 << 20), b""):
            h.update(block)

    return h.hexdigest()


def _int_list(text):
    try:
        values = [int(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError("expected comma-separated integers") from None

    if not values or min(values) < 1:
        raise argparse.ArgumentTypeError("expected positive integers")

    return values


def _positive_float(text):
    v = float(text)

    if not v > 0:
        raise argparse.ArgumentTypeError("must be positive")

    return v


# simulate-data ------------------------------------------------------------


def cmd_simulate(args):
    rng = np.random.default_rng(args.seed)

    if args.kind == "cycle":
        ds = gen_cycle_dataset(args.p, rng)
    elif args.kind == "model":
        ds = gen_model_dataset(args.p, args.delta, rng)
    else:
        G = gen_bench_graph(args.graph_kind, args.p, rng)
        atomic_write(args.out, "# p=%d\n" % G.p + G.to_edge_list())
        return EXIT_OK

    save_dataset(ds, args.out)
    return EXIT_OK


# run ----------------------------------------------------------------------


def _graph_prior(text):
    try:
        return GraphPrior.parse(text)
    except ValueError as exc:
        raise UsageError(str(exc)) from None


def _initial_graph(args, p):
    if args.init is None or args.init == "empty":
        return None

    if args.init == "true":
        G, _ = load_truth(args.data)
        return G

    with open(args.init) as fh:
        return Graph.from_edge_list(p, fh.read())


def cmd_run(args):
    ds = load_matrix_csv(args.data, demean=args.demean)
    p = ds.p
    config = ChainConfig(
        algorithm=args.algo,
        iterations=args.iters,
        burn_in=args.burnin,
        n_e=args.n_e,
        seed=args.seed,
        approx_variant=args.approx,
        cl_inner=args.cl_inner,
        threads=args.threads,
        dcbf_sweep=args.dcbf_sweep,
        track_k=args.out_khat is not None,
        sampler=SamplerConfig(tol=args.tol, max_sweeps=args.max_sweeps, decomposition=args.decomposition),
    ).resolved(p)
    model = Model.from_data(ds.Y, delta=args.delta, D=args.d_scale * np.eye(p), graph_prior=_graph_prior(args.prior))
    G0 = _initial_graph(args, p)
    started = _now()

    progress = None

    if args.progress:
        def progress(t, n):
            sys.stderr.write("iteration %d/%d\n" % (t, n))

    trace = run_chain(config, model, G=G0, progress=progress)

    if args.no_timings:
        trace.nanos[:] = 0

    trace.to_csv(args.out_trace)

    if args.out_khat is not None:
        write_matrix_csv(args.out_khat, trace.k_hat)

    manifest_path = args.out_manifest or args.out_trace + ".manifest.json"
    manifest = {
        "command": ["wwa"] + list(args.argv),
        "config": config.to_dict(),
        "model": {"delta": args.delta, "d_scale": args.d_scale, "prior": str(model.graph_prior), "demean": args.demean, "p": p, "n": ds.n},
        "inputs": {"data": os.path.abspath(args.data), "data_sha256": _sha256(args.data), "init": args.init},
        "outputs": {
            "trace": os.path.abspath(args.out_trace),
            "khat": None if args.out_khat is None else os.path.abspath(args.out_khat),
        },
        "version": __version__,
        "backend": BACKEND,
        "started": started,
        "finished": _now(),
        "final_counters": {
            "promotions": int(trace.counter("promotions")[-1]),
            "accepts": int(trace.counter("accepts")[-1]),
            "first_stage_rejections": int(trace.counter("first_stage_rejections")[-1]),
            "prior_draws": int(trace.counter("prior_draws")[-1]),
        },
    }
    atomic_write(manifest_path, json.dumps(manifest, indent=2) + "\n")
    return EXIT_OK


# diagnose -----------------------------------------------------------------


def _read_matrix(path):
    with open(path, newline="") as fh:
        M, _ = parse_matrix_csv(fh.read(), path)

    return M


def _truth_matrix(path):
    """--truth takes the dense K CSV or a data file with a truth sidecar."""
    _, k_path = truth_paths(path)

    if os.path.exists(k_path) and not path.endswith(".truth.K.csv"):
        path = k_path

    return _read_matrix(path)


def cmd_diagnose(args):
    trace = Trace.from_csv(args.trace, p=args.p)
    K_true = _truth_matrix(args.truth) if args.truth else None
    k_hat = _read_matrix(args.khat) if args.khat else None

    for name, M in (("truth", K_true), ("khat", k_hat)):
        if M is not None and M.shape != (trace.p, trace.p):
            raise UsageError("%s matrix is %dx%d but the trace has p=%d" % (name, M.shape[0], M.shape[1], trace.p))

    report = diagnose(trace, K_true=K_true, k_hat=k_hat)
    text = report.to_json(args.out)

    if args.out is None:
        sys.stdout.write(text)

    if args.out_inclusion:
        write_matrix_csv(args.out_inclusion, report.inclusion)

    return EXIT_OK


# bench-gwishart -----------------------------------------------------------


def cmd_bench(args):
    try:
        parse_graph_kind(args.graph_kind)
    except ValueError as exc:
        raise UsageError(str(exc)) from None

    if args.graph_kind == "chorded-cycle" and min(args.p_list) < 4:
        raise UsageError("chorded-cycle needs p >= 4")

    decs = ("on", "off") if args.decomposition == "both" else (args.decomposition,)
    warm_up()
    rows = bench_rgwish(args.graph_kind, args.p_list, args.reps, decs, seed=args.seed)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(BENCH_COLUMNS)

    for kind, p, rep, dec, nanos, frac in rows:
        w.writerow([kind, p, rep, dec, nanos, "%.6g" % frac])

    if args.out:
        atomic_write(args.out, buf.getvalue())
    else:
        sys.stdout.write(buf.getvalue())

    return EXIT_OK


# parser -------------------------------------------------------------------


def build_parser():
    parser = _Parser(prog="wwa", description="Graph-structure MCMC for Gaussian graphical models.")
    parser.add_argument("--version", action="version", version="%(prog)s " + __version__)
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)
    sub.required = True

    s = sub.add_parser("simulate-data", help="generate a synthetic dataset or benchmark graph")
    s.add_argument("--kind", choices=("cycle", "model", "bench-graph"), required=True)
    s.add_argument("--p", type=int, required=True)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--out", required=True)
    s.add_argument("--delta", type=float, default=3.0, help="degrees of freedom for --kind model")
    s.add_argument("--graph-kind", default="chorded-cycle", help="chorded-cycle or er:<rho> for --kind bench-graph")
    s.set_defaults(func=cmd_simulate)

    r = sub.add_parser("run", help="run one chain and write its trace")
    r.add_argument("--algo", choices=ALGORITHMS, default="wwa")
    r.add_argument("--data", required=True)
    r.add_argument("--demean", action="store_true", help="centre each data column first")
    r.add_argument("--delta", type=float, default=3.0)
    r.add_argument("--d-scale", type=_positive_float, default=1.0, help="prior rate matrix D = scale * I")
    r.add_argument("--prior", default="uniform", help="uniform or bernoulli:<rho>")
    r.add_argument("--iters", type=int, default=1000)
    r.add_argument("--burnin", type=int, default=0)
    r.add_argument("--n-e", type=int, default=None, help="single-edge updates per iteration (default p)")
    r.add_argument("--approx", choices=("mohammadi", "unit"), default="mohammadi")
    r.add_argument("--cl-inner", default="block-gibbs:10", help="direct or block-gibbs:T")
    r.add_argument("--dcbf-sweep", action="store_true", help="DCBF visits every pair once per iteration")
    r.add_argument("--decomposition", choices=("enabled", "disabled", "components-only"), default="enabled")
    r.add_argument("--tol", type=_positive_float, default=1e-8)
    r.add_argument("--max-sweeps", type=int, default=1000)
    r.add_argument("--seed", type=int, default=0)
    r.add_argument("--threads", type=int, default=1)
    r.add_argument("--init", default=None, help="empty (default), true, or an edge-list file")
    r.add_argument("--out-trace", default="trace.csv")
    r.add_argument("--out-manifest", default=None)
    r.add_argument("--out-khat", default=None, help="write the posterior mean of K")
    r.add_argument("--no-timings", action="store_true", help="write zero nanos so traces are byte-reproducible")
    r.add_argument("--progress", action="store_true")
    r.set_defaults(func=cmd_run)

    d = sub.add_parser("diagnose", help="summaries of a trace")
    d.add_argument("--trace", required=True)
    d.add_argument("--truth", default=None, help="true K as CSV, or a data file with a truth sidecar")
    d.add_argument("--khat", default=None, help="posterior mean of K as CSV")
    d.add_argument("--p", type=int, default=None, help="node count (inferred from the trace by default)")
    d.add_argument("--out", default=None, help="JSON report path (default stdout)")
    d.add_argument("--out-inclusion", default=None, help="inclusion matrix CSV path")
    d.set_defaults(func=cmd_diagnose)

    b = sub.add_parser("bench-gwishart", help="time G-Wishart draws with and without decomposition")
    b.add_argument("--graph-kind", default="chorded-cycle")
    b.add_argument("--p-list", type=_int_list, default=[10, 20, 40, 80])
    b.add_argument("--reps", type=int, default=10)
    b.add_argument("--decomposition", choices=("on", "off", "both"), default="both")
    b.add_argument("--seed", type=int, default=0)
    b.add_argument("--out", default=None, help="CSV path (default stdout)")
    b.set_defaults(func=cmd_bench)

    return parser


def main(argv=None):
    argv = sys.argv[1:] if argv is None else list(argv)
    parser = build_parser()

    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else EXIT_CONFIG

    args.argv = argv

    try:
        return args.func(args)
    except (UsageError, ConfigError, FileNotFoundError, IsADirectoryError) as exc:
        sys.stderr.write("wwa: error: %s\n" % exc)
        return EXIT_CONFIG
    except ValueError as exc:
        sys.stderr.write("wwa: invalid input: %s\n" % exc)
        return EXIT_CONFIG
    except (GWishartError, np.linalg.LinAlgError, OSError, RuntimeError) as exc:
        sys.stderr.write("wwa: failed: %s\n" % exc)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
