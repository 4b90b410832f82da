"""
Posterior sampling over graphs for Gaussian graphical models with a
G-Wishart prior.

Algorithms (``ChainConfig.algorithm``):

* ``wwa``: informed single-edge proposals with delayed acceptance and
  Cholesky-level updates of K, the exchange algorithm at the second stage.
* ``wwa-no-informed``: as ``wwa`` with the base proposal q in both directions.
* ``wwa-no-da``: informed proposal, no first stage: every proposal goes to
  the exchange step, corrected by the proposal ratio.
* ``exchange-plain``: base proposal straight into the exchange step.
* ``dcbf``: random single-edge flips with a fresh posterior draw of K and an
  auxiliary prior draw per flip.
* ``cl``: Barker first stage on the analytic part of the ratio, exchange
  second stage with an exact or block Gibbs auxiliary draw, Gibbs updates of
  K in between.

The graph-level functions in this module mirror the compiled kernels in
:mod:`wwa.kernels` one operation at a time; they are the reference the
kernels are tested against.
"""

import math
import time
from dataclasses import dataclass, field, replace

import numpy as np

from . import kernels as kn
from ._jit import set_threads
from ._random import seed_from
from .graph import Graph, GraphPrior, all_pairs, flip_edge, stable_shift, _check_pair
from .gwishart import (
    GUARD_FAILED,
    NOT_CONVERGED,
    NOT_PD,
    OK,
    GWishartConvergenceError,
    GWishartError,
    GWishartParams,
    PosteriorParams,
    SamplerConfig,
    approx_log_ratio,
    rgwish_into,
)
from .linalg import cholesky_upper, permute_symmetric, pd_inverse
from .trace import COUNTER_NAMES, Trace, n_words

ALGORITHMS = ("wwa", "wwa-no-informed", "wwa-no-da", "exchange-plain", "dcbf", "cl")
_WWA_VARIANTS = {
    "wwa": kn.WWA,
    "wwa-no-informed": kn.WWA_NO_INFORMED,
    "wwa-no-da": kn.WWA_NO_DA,
    "exchange-plain": kn.EXCHANGE_PLAIN,
}


class ConfigError(ValueError):
    pass


def parse_cl_inner(text):
    """``direct`` -> 0, ``block-gibbs:T`` -> T (``block-gibbs`` alone means T=10)."""
    text = str(text).strip().lower()

    if text == "direct":
        return 0

    if text == "block-gibbs":
        return 10

    if text.startswith("block-gibbs:"):
        try:
            T = int(text.split(":", 1)[1])
        except ValueError:
            raise ConfigError("block-gibbs sweep count must be an integer") from None

        if T < 1:
            raise ConfigError("block-gibbs sweep count must be positive")

        return T

    raise ConfigError("cl inner sampler must be 'direct' or 'block-gibbs:T'")


@dataclass(frozen=True)
class ChainConfig:
    algorithm: str = "wwa"
    iterations: int = 1000
    burn_in: int = 0
    n_e: int = None
    seed: int = 0
    approx_variant: str = "mohammadi"
    cl_inner: str = "block-gibbs:10"
    threads: int = 1
    dcbf_sweep: bool = False
    track_k: bool = False
    sampler: SamplerConfig = field(default_factory=SamplerConfig)

    def __post_init__(self):
        if self.algorithm not in ALGORITHMS:
            raise ConfigError("unknown algorithm %r; choose from %s" % (self.algorithm, ", ".join(ALGORITHMS)))

        if self.n_e is not None and self.n_e < 1:
            raise ConfigError("n_E must be at least 1")

        if not self.iterations > self.burn_in >= 0:
            raise ConfigError("need iterations > burn_in >= 0")

        if self.approx_variant not in ("mohammadi", "unit"):
            raise ConfigError("approximation must be 'mohammadi' or 'unit'")

        if self.threads < 1:
            raise ConfigError("threads must be at least 1")

        if not 0 <= int(self.seed) < 2**64:
            raise ConfigError("seed must be a 64-bit unsigned integer")

        parse_cl_inner(self.cl_inner)

    @property
    def cl_sweeps(self):
        return parse_cl_inner(self.cl_inner)

    def resolved(self, p):
        """Copy with n_E filled in (default p)."""
        return self if self.n_e is not None else replace(self, n_e=p)

    def to_dict(self):
        return {
            "algorithm": self.algorithm,
            "iterations": self.iterations,
            "burn_in": self.burn_in,
            "n_e": self.n_e,
            "seed": int(self.seed),
            "approx_variant": self.approx_variant,
            "cl_inner": self.cl_inner,
            "threads": self.threads,
            "dcbf_sweep": self.dcbf_sweep,
            "track_k": self.track_k,
            "sampler": {
                "tol": self.sampler.tol,
                "max_sweeps": self.sampler.max_sweeps,
                "decomposition": self.sampler.decomposition,
            },
        }


@dataclass(frozen=True)
class Model:
    """G-Wishart prior (delta, D), its conjugate update, and the graph prior."""

    prior: GWishartParams
    posterior: PosteriorParams
    graph_prior: GraphPrior = GraphPrior()

    @classmethod
    def from_data(cls, Y, delta=3.0, D=None, graph_prior=None):
        Y = np.asarray(Y, dtype=np.float64)
        p = Y.shape[1]
        prior = GWishartParams(delta, np.eye(p) if D is None else D)
        return cls(prior, PosteriorParams.from_data(prior, Y), graph_prior or GraphPrior())

    @property
    def p(self):
        return self.prior.p


# Single-edge quantities -------------------------------------------------


@dataclass(frozen=True)
class PrecisionState:
    """
    K together with the reordering for edge ``e`` and the upper Cholesky
    factor of the reordered matrix.
    """

    K: np.ndarray
    perm: np.ndarray
    phi: np.ndarray
    e: tuple

    @classmethod
    def for_edge(cls, K, e):
        K = np.asarray(K, dtype=np.float64)
        i, j = _check_pair(K.shape[0], *e)
        perm = stable_shift(K.shape[0], i, j)
        return cls(K, perm, cholesky_upper(permute_symmetric(K, perm)), (i, j))

    @property
    def p(self):
        return self.K.shape[0]

    def permuted(self, A):
        return permute_symmetric(A, self.perm)

    def rebuild(self, phi12, phi22):
        """K~ in the original node order after replacing the two free entries."""
        phi = self.phi.copy()
        phi[-2, -1] = phi12
        phi[-1, -1] = phi22
        Kp = phi.T @ phi
        return permute_symmetric(Kp, np.argsort(self.perm))


def compute_log_N(phi, Dmat):
    """
    log N for an edge placed at the last two positions. ``phi`` is the upper
    Cholesky factor and ``Dmat`` the rate matrix, both in that ordering.
    """
    phi = np.asarray(phi, dtype=np.float64)
    Dmat = np.asarray(Dmat, dtype=np.float64)

    if phi.shape[0] < 2:
        raise ValueError("need p >= 2")

    if not Dmat[-1, -1] > 0:
        raise ValueError("D_pp must be positive")

    cross = float(phi[:-2, -2] @ phi[:-2, -1])
    return kn.log_N(float(phi[-2, -2]), cross, float(Dmat[-2, -1]), float(Dmat[-1, -1]))


def _rng(rng):
    return np.random.default_rng(rng) if rng is None or isinstance(rng, (int, np.integer)) else rng


def sample_phi_edge(state, G_tilde, D_star, rng=None):
    """
    New Phi_{p-1,p} for the flipped graph: a normal draw if the edge is
    present in G~, otherwise the value that zeroes K~_{p-1,p}. ``D_star`` is
    in the original node order.
    """
    phi = state.phi
    phi11 = phi[-2, -2]

    if G_tilde.has_edge(*state.e):
        Dp = state.permuted(D_star)
        mean = -phi11 * Dp[-2, -1] / Dp[-1, -1]
        return float(mean + _rng(rng).standard_normal() / math.sqrt(Dp[-1, -1]))

    return float(-(phi[:-2, -2] @ phi[:-2, -1]) / phi11)


def resample_phi_pp(state, delta_star, D_star, rng=None):
    """Phi_pp with D*_pp Phi_pp^2 ~ chi^2(delta*)."""
    Dpp = state.permuted(D_star)[-1, -1]
    return float(math.sqrt(_rng(rng).chisquare(delta_star) / Dpp))


def log_rhat(G, G_tilde, state, prior, D_star, delta, variant="mohammadi"):
    """log R^ for the move G -> G~ at the edge of ``state``."""
    s = G_tilde.n_edges - G.n_edges
    direction = "add" if s > 0 else "remove"
    return (
        s * prior.log_odds
        + s * compute_log_N(state.phi, state.permuted(D_star))
        + approx_log_ratio(G, state.e, direction, delta, variant)
    )


def log_r_exchange(prior, G, G_tilde, logN_current, logN_prior_draw):
    s = G_tilde.n_edges - G.n_edges

    if abs(s) != 1:
        raise ValueError("G_tilde must differ from G by one edge")

    return s * prior.log_odds + s * (logN_current - logN_prior_draw)


def balancing_g(t):
    """g(t) = t / (1 + t)."""
    return t / (1.0 + t)


def log_balancing_g(log_t):
    return kn.log_g(float(log_t))


def base_proposal(G):
    """Pairs in row-major order and their probabilities under q(.|G)."""
    i, j = all_pairs(G.p)
    m = len(i)
    s = np.where(G.adj[i, j], -1, 1)
    logq = np.array([kn.log_base_q(G.n_edges, m, int(v)) for v in s])
    return list(zip(i.tolist(), j.tolist())), np.exp(logq)


@dataclass
class ProposalEvaluation:
    pairs: list
    log_weights: np.ndarray
    log_rhat: np.ndarray
    logZ: float
    chosen: int = None
    log_rhat_da: float = None
    log_r_exchange: float = None
    log_r_da: float = None

    @property
    def probabilities(self):
        return np.exp(self.log_weights - self.logZ)

    def log_q(self, k):
        return float(self.log_weights[k] - self.logZ)


def informed_proposal(G, K, prior, D_star, delta, variant="mohammadi", workers=1, rng=None):
    """
    Evaluate Q(.|G, K) over all single-edge flips. The weights use no
    randomness; with ``rng`` one candidate is drawn with a single uniform.
    """
    K = np.ascontiguousarray(K, dtype=np.float64)
    p = G.p
    pi, pj = all_pairs(p)
    m = len(pi)
    logw = np.empty(m)
    lrh = np.empty(m)
    Sigma = pd_inverse(K)
    tab = kn.approx_table(delta, p, variant)
    Ds = np.ascontiguousarray(D_star, dtype=np.float64)

    if workers > 1:
        set_threads(workers)

    logZ = kn.scan(
        np.array(G.adj), K, Sigma, Ds, float(prior.log_odds), tab, pi, pj,
        G.n_edges, workers > 1, logw, lrh,
    )
    ev = ProposalEvaluation(list(zip(pi.tolist(), pj.tolist())), logw, lrh, float(logZ))

    if rng is not None:
        ev.chosen = int(kn.select(logw, logZ, _rng(rng).random()))

    return ev


def informed_proposal_reference(G, K, prior, D_star, delta, variant="mohammadi"):
    """
    Same weights as :func:`informed_proposal`, each candidate computed from an
    explicit reordering and Cholesky factorisation of K.
    """
    pairs, q = base_proposal(G)
    lrh = np.empty(len(pairs))

    for k, e in enumerate(pairs):
        state = PrecisionState.for_edge(K, e)
        lrh[k] = log_rhat(G, flip_edge(G, e), state, prior, D_star, delta, variant)

    logw = np.array([kn.log_g(v) for v in lrh]) + np.log(q)
    mx = logw.max()
    return ProposalEvaluation(pairs, logw, lrh, float(mx + np.log(np.sum(np.exp(logw - mx)))))


# Chains ---------------------------------------------------------------------


@dataclass
class ChainState:
    G: Graph
    K: np.ndarray


def _raise_status(status, info, where):
    if status == OK:
        return

    if status == NOT_CONVERGED:
        raise GWishartConvergenceError("G-Wishart draw did not converge at %s" % where, float(info[0]))

    if status == GUARD_FAILED:
        raise GWishartConvergenceError("G-Wishart non-edge guard failed at %s" % where, float(info[0]))

    raise GWishartError("positive definiteness lost at %s" % where)


class Sampler:
    """
    Mutable chain driver around the compiled iteration kernels. The kernel
    stream is seeded from ``rng`` (or ``config.seed``) once at construction.
    """

    def __init__(self, config, model, G=None, K=None, rng=None):
        p = model.p
        self.config = config = config.resolved(p)
        self.model = model
        self.p = p
        self.pi, self.pj = all_pairs(p)
        self.adj = np.array((G or Graph.empty(p)).adj, dtype=bool)

        if self.adj.shape != (p, p):
            raise ConfigError("initial graph has the wrong number of nodes")

        seed_from(np.random.default_rng(config.seed) if rng is None else _rng(rng))
        sc = config.sampler
        self.tol = float(sc.tol)
        self.max_sweeps = int(sc.max_sweeps)
        self.mode = int(sc.mode)
        self.delta = float(model.prior.delta)
        self.D0 = model.prior.D
        self.delta_s = float(model.posterior.delta_star)
        self.Ds = model.posterior.D_star
        self.log_odds = float(model.graph_prior.log_odds)
        self.approx_tab = kn.approx_table(self.delta, p, config.approx_variant)
        self.counters = np.zeros(kn.N_COUNTERS, dtype=np.int64)
        self.info = np.zeros(2)
        self.bits = np.zeros(n_words(len(self.pi)), dtype=np.uint64)
        self.ksum = np.zeros((p, p))
        self.K = np.empty((p, p))

        if K is None:
            status, resid = rgwish_into(self.adj, self.delta_s, self.Ds, self.tol, self.max_sweeps, self.mode, self.K)
            self.info[0] = resid
            _raise_status(status, self.info, "initialisation")
        else:
            self.K[:, :] = K

        self.Sigma = pd_inverse(self.K)
        self._step = self._bind()

    def _bind(self):
        c = self.config

        if c.algorithm in _WWA_VARIANTS:
            variant = _WWA_VARIANTS[c.algorithm]
            parallel = c.threads > 1

            def step(accum):
                return kn.wwa_iteration(
                    self.adj, self.K, self.Sigma, self.delta, self.D0, self.delta_s, self.Ds,
                    self.log_odds, self.approx_tab, c.n_e, variant, self.tol, self.max_sweeps,
                    self.mode, self.pi, self.pj, parallel, self.counters, self.info, self.bits,
                    self.ksum, accum,
                )

        elif c.algorithm == "dcbf":
            want_k = bool(c.track_k)

            def step(accum):
                return kn.dcbf_iteration(
                    self.adj, self.K, self.delta, self.D0, self.delta_s, self.Ds, self.log_odds,
                    c.n_e, c.dcbf_sweep, want_k, self.tol, self.max_sweeps, self.mode, self.pi,
                    self.pj, self.counters, self.info, self.bits, self.ksum, accum,
                )

        else:
            sweeps = c.cl_sweeps

            def step(accum):
                return kn.cl_iteration(
                    self.adj, self.K, self.Sigma, self.delta, self.D0, self.delta_s, self.Ds,
                    self.log_odds, c.n_e, sweeps, self.tol, self.max_sweeps, self.mode, self.pi,
                    self.pj, self.counters, self.info, self.bits, self.ksum, accum,
                )

        return step

    def step(self, accum=False, where="iteration"):
        status = self._step(bool(accum))
        _raise_status(status, self.info, where)

    @property
    def graph(self):
        return Graph(self.adj.copy())

    @property
    def n_edges(self):
        return int(self.info[1])

    def state(self):
        return ChainState(self.graph, self.K.copy())


def _one_step(algorithm, state, model, config, rng):
    config = replace(config, algorithm=algorithm)
    s = Sampler(config, model, G=state.G, K=state.K, rng=rng)
    s.step()
    deltas = dict(zip(COUNTER_NAMES, s.counters.tolist()))
    return s.state(), deltas


def wwa_step(state, model, config, rng=None):
    """One WWA iteration (or the ablation named by ``config.algorithm``)."""
    algo = config.algorithm if config.algorithm in _WWA_VARIANTS else "wwa"
    return _one_step(algo, state, model, config, rng)


def dcbf_step(state, model, config, rng=None):
    return _one_step("dcbf", state, model, config, rng)


def cl_step(state, model, config, rng=None):
    return _one_step("cl", state, model, config, rng)


def run_chain(config, model, G=None, rng=None, progress=None):
    """
    Run ``config.iterations`` iterations (burn-in included) and return the
    full :class:`Trace`. Per-iteration wall time is measured around each
    compiled iteration.
    """
    sampler = Sampler(config, model, G=G, rng=rng)
    config = sampler.config
    set_threads(config.threads)
    n = config.iterations
    words = np.zeros((n, len(sampler.bits)), dtype=np.uint64)
    n_edges = np.zeros(n, dtype=np.int64)
    nanos = np.zeros(n, dtype=np.int64)
    counters = np.zeros((n, kn.N_COUNTERS), dtype=np.int64)
    track = config.track_k
    clock = time.perf_counter_ns

    for t in range(n):
        t0 = clock()
        status = sampler._step(track and t >= config.burn_in)
        t1 = clock()

        if status != OK:
            _raise_status(status, sampler.info, "iteration %d" % (t + 1))

        words[t] = sampler.bits
        n_edges[t] = sampler.info[1]
        nanos[t] = t1 - t0
        counters[t] = sampler.counters

        if progress is not None and (t + 1) % 10000 == 0:
            progress(t + 1, n)

    k_hat = sampler.ksum / (n - config.burn_in) if track else None
    return Trace(model.p, words, n_edges, nanos, counters, burn_in=config.burn_in, k_hat=k_hat)
