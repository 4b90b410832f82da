import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import stats

from oracles import exact_posterior_p3, p3_data, total_variation
from wwa import kernels as kn
from wwa.graph import Graph, GraphPrior, flip_edge
from wwa.gwishart import GWishartParams, SamplerConfig, sample_direct
from wwa.linalg import pd_inverse
from wwa.mcmc import (
    ALGORITHMS,
    ChainConfig,
    ConfigError,
    Model,
    PrecisionState,
    Sampler,
    balancing_g,
    base_proposal,
    cl_step,
    compute_log_N,
    dcbf_step,
    informed_proposal,
    informed_proposal_reference,
    log_balancing_g,
    log_r_exchange,
    log_rhat,
    parse_cl_inner,
    resample_phi_pp,
    run_chain,
    sample_phi_edge,
    wwa_step,
    ChainState,
)


@st.composite
def graph_and_precision(draw, min_p=3, max_p=8):
    p = draw(st.integers(min_p, max_p))
    m = p * (p - 1) // 2
    bits = np.array(draw(st.lists(st.booleans(), min_size=m, max_size=m)), dtype=bool)
    G = Graph.from_bits(p, bits)
    seed = draw(st.integers(0, 2**32 - 1))
    rng = np.random.default_rng(seed)
    K = sample_direct(G, GWishartParams(3.0 + p, np.eye(p)), rng=rng)
    A = rng.standard_normal((p, p + 3))
    D_star = np.eye(p) + A @ A.T
    return G, K, D_star


def p3_model():
    return Model.from_data(p3_data())


# log N -------------------------------------------------------------------


def test_log_N_identity_case():
    phi = np.eye(3)
    D = np.diag([1.0, 1.0, 2 * math.pi])
    assert compute_log_N(phi, D) == pytest.approx(0.0, abs=1e-15)


def test_log_N_hand_computed_p2():
    phi = np.array([[2.0, 0.7], [0.0, 1.3]])
    D = np.diag([1.0, 2 * math.pi])
    assert compute_log_N(phi, D) == pytest.approx(math.log(2.0), abs=1e-15)


def test_log_N_matches_formula_and_stays_finite():
    rng = np.random.default_rng(0)
    A = rng.standard_normal((5, 5))
    phi = np.triu(A) + 3 * np.eye(5)
    D = np.eye(5)
    D[3, 4] = D[4, 3] = 0.2
    f = phi[3, 3]
    s = phi[:3, 3] @ phi[:3, 4]
    expected = math.log(f) + 0.5 * math.log(2 * math.pi / D[4, 4]) + 0.5 * D[4, 4] * (f * D[3, 4] / D[4, 4] - s / f) ** 2
    assert compute_log_N(phi, D) == pytest.approx(expected, rel=1e-13)
    D[4, 4] = 1e-6
    assert math.isfinite(compute_log_N(phi, D))

    with pytest.raises(ValueError):
        compute_log_N(phi, np.diag([1.0, 1.0, 1.0, 1.0, 0.0]))


@settings(max_examples=40, deadline=None)
@given(graph_and_precision(), st.data())
def test_schur_terms_match_explicit_cholesky(gk, data):
    G, K, _ = gk
    p = G.p
    i = data.draw(st.integers(0, p - 2))
    j = data.draw(st.integers(i + 1, p - 1))
    state = PrecisionState.for_edge(K, (i, j))
    phi11, phi12, cross, rest = kn.edge_terms(K, pd_inverse(K), i, j)
    phi = state.phi
    assert phi11 == pytest.approx(phi[-2, -2], rel=1e-9)
    assert phi12 == pytest.approx(phi[-2, -1], rel=1e-9, abs=1e-9)
    assert cross == pytest.approx(phi[:-2, -2] @ phi[:-2, -1], rel=1e-8, abs=1e-9)
    assert rest == pytest.approx(phi[:-2, -1] @ phi[:-2, -1], rel=1e-8, abs=1e-9)


# Conditionals ---------------------------------------------------------------


@settings(max_examples=60, deadline=None)
@given(graph_and_precision(), st.data())
def test_removal_zero_fill(gk, data):
    G, K, D_star = gk
    edges = G.edges()

    if not edges:
        return

    e = edges[data.draw(st.integers(0, len(edges) - 1))]
    state = PrecisionState.for_edge(K, e)
    G_tilde = flip_edge(G, e)
    phi12 = sample_phi_edge(state, G_tilde, D_star)
    phi22 = resample_phi_pp(state, 3.0 + 10, D_star, np.random.default_rng(1))
    Kt = state.rebuild(phi12, phi22)
    assert abs(Kt[e]) < 1e-10
    assert np.all(np.linalg.eigvalsh(Kt) > 0)
    # Only the (i, j) and (j, j) entries move.
    i, j = e
    mask = np.ones_like(K, dtype=bool)
    mask[i, j] = mask[j, i] = mask[j, j] = False
    assert np.allclose(Kt[mask], K[mask], rtol=1e-10, atol=1e-10)


def test_addition_mean_formula():
    K = np.diag([4.0, 1.0])
    state = PrecisionState.for_edge(K, (0, 1))
    D_star = np.array([[1.0, 1.0], [1.0, 4.0]])
    G_tilde = Graph.complete(2)
    rng = np.random.default_rng(2)
    x = np.array([sample_phi_edge(state, G_tilde, D_star, rng) for _ in range(20000)])
    se = math.sqrt(0.25 / len(x))
    assert abs(x.mean() + 0.5) < 3 * se
    assert abs(x.var() - 0.25) < 3 * 0.25 * math.sqrt(2 / len(x))


def test_addition_zero_mean_for_scaled_identity():
    K = sample_direct(Graph.empty(4), GWishartParams(3.0, np.eye(4)), rng=3)
    state = PrecisionState.for_edge(K, (1, 3))
    c = 2.5
    rng = np.random.default_rng(4)
    x = np.array([sample_phi_edge(state, Graph.from_edges(4, [(1, 3)]), c * np.eye(4), rng) for _ in range(20000)])
    assert abs(x.mean()) < 3 * math.sqrt(1 / c / len(x))
    assert abs(x.var() - 1 / c) < 3 * (1 / c) * math.sqrt(2 / len(x))


def test_resample_phi_pp_chi_square():
    K = sample_direct(Graph.cycle(4), GWishartParams(3.0, np.eye(4)), rng=5)
    state = PrecisionState.for_edge(K, (0, 2))
    D_star = np.diag([1.0, 2.0, 3.0, 0.7])
    delta_star = 13.0
    rng = np.random.default_rng(6)
    phi = np.array([resample_phi_pp(state, delta_star, D_star, rng) for _ in range(20000)])
    assert np.all(phi > 0)
    x = state.permuted(D_star)[-1, -1] * phi**2
    assert stats.kstest(x, stats.chi2(delta_star).cdf).pvalue > 1e-3
    assert abs(x.mean() - delta_star) < 3 * math.sqrt(2 * delta_star / len(x))


# Ratios -----------------------------------------------------------------------


def _unit_logN_state():
    return PrecisionState.for_edge(np.eye(2), (0, 1)), np.diag([1.0, 2 * math.pi])


def test_log_rhat_examples():
    state, D_star = _unit_logN_state()
    prior = GraphPrior()
    empty, full = Graph.empty(2), Graph.complete(2)
    assert log_rhat(empty, full, state, prior, D_star, 3.0) == pytest.approx(math.log(0.25), abs=1e-12)
    assert log_rhat(full, empty, state, prior, D_star, 3.0) == pytest.approx(math.log(4.0), abs=1e-12)
    assert log_rhat(empty, full, state, prior, D_star, 3.0, "unit") == pytest.approx(0.0, abs=1e-15)


def test_log_r_exchange_examples():
    prior = GraphPrior()
    G, H = Graph.empty(3), Graph.from_edges(3, [(0, 1)])
    assert log_r_exchange(prior, G, H, 1.7, 1.7) == 0.0
    assert log_r_exchange(prior, G, H, math.log(2.0) + 0.3, 0.3) == pytest.approx(math.log(2.0))
    bern = GraphPrior("bernoulli", 0.3)
    assert log_r_exchange(bern, G, H, 0.4, -1.1) == -log_r_exchange(bern, H, G, 0.4, -1.1)


def test_base_proposal_cases():
    pairs, q = base_proposal(Graph.empty(3))
    assert np.allclose(q, 1 / 3)
    G = Graph.from_edges(3, [(0, 2)])
    pairs, q = base_proposal(G)
    assert dict(zip(pairs, q)) == pytest.approx({(0, 1): 0.25, (0, 2): 0.5, (1, 2): 0.25})
    _, q = base_proposal(Graph.complete(3))
    assert np.allclose(q, 1 / 3)

    for G in (Graph.cycle(5), Graph.from_edges(5, [(0, 1)])):
        assert base_proposal(G)[1].sum() == pytest.approx(1.0, abs=1e-15)


def test_balancing_function():
    assert balancing_g(1.0) == 0.5

    for t in (0.1, 1.0, 7.3):
        assert balancing_g(t) == pytest.approx(t * balancing_g(1 / t), abs=1e-15)
        assert log_balancing_g(math.log(t)) == pytest.approx(math.log(balancing_g(t)), abs=1e-15)

    assert math.isfinite(log_balancing_g(-800.0)) and log_balancing_g(800.0) == 0.0


# Informed proposal ------------------------------------------------------------


@settings(max_examples=40, deadline=None)
@given(graph_and_precision(), st.sampled_from(["mohammadi", "unit"]), st.sampled_from([0.5, 0.2]))
def test_informed_proposal_matches_reference(gk, variant, rho):
    G, K, D_star = gk
    prior = GraphPrior("bernoulli", rho)
    fast = informed_proposal(G, K, prior, D_star, 3.0, variant)
    ref = informed_proposal_reference(G, K, prior, D_star, 3.0, variant)
    assert np.allclose(fast.log_rhat, ref.log_rhat, rtol=1e-10, atol=1e-10)
    assert np.allclose(fast.log_weights, ref.log_weights, rtol=1e-10, atol=1e-10)
    assert abs(fast.probabilities.sum() - 1.0) < 1e-12


@settings(max_examples=20, deadline=None)
@given(graph_and_precision(min_p=5, max_p=9))
def test_informed_weights_identical_across_workers(gk):
    G, K, D_star = gk
    prior = GraphPrior()
    a = informed_proposal(G, K, prior, D_star, 3.0, workers=1)
    b = informed_proposal(G, K, prior, D_star, 3.0, workers=4)
    c = informed_proposal(G, K, prior, D_star, 3.0, workers=1)
    assert np.array_equal(a.log_weights, b.log_weights)
    assert np.array_equal(a.log_weights, c.log_weights)
    assert a.logZ == b.logZ


def test_informed_selection_uses_one_uniform():
    G = Graph.cycle(5)
    K = sample_direct(G, GWishartParams(3.0, np.eye(5)), rng=1)
    ev = informed_proposal(G, K, GraphPrior(), np.eye(5), 3.0, rng=np.random.default_rng(9))
    u = np.random.default_rng(9).random()
    cdf = np.cumsum(ev.probabilities)
    assert ev.chosen == int(np.searchsorted(cdf, u, side="right"))


# Chains -------------------------------------------------------------------------


def test_config_validation():
    with pytest.raises(ConfigError):
        ChainConfig(algorithm="frobnicate")

    with pytest.raises(ConfigError):
        ChainConfig(iterations=10, burn_in=10)

    with pytest.raises(ConfigError):
        ChainConfig(n_e=0)

    with pytest.raises(ConfigError):
        ChainConfig(cl_inner="block-gibbs:x")

    assert parse_cl_inner("direct") == 0
    assert parse_cl_inner("block-gibbs") == 10
    assert parse_cl_inner("block-gibbs:3") == 3
    assert ChainConfig().resolved(7).n_e == 7


@pytest.mark.parametrize("algo", ALGORITHMS)
def test_same_seed_same_trace(algo):
    model = p3_model()
    cfg = ChainConfig(algorithm=algo, iterations=300, burn_in=50, seed=17)
    a = run_chain(cfg, model)
    b = run_chain(cfg, model)
    assert a.hex_rows() == b.hex_rows()
    assert len(a) == 300 and len(a.recorded()) == 250
    c = run_chain(ChainConfig(algorithm=algo, iterations=300, burn_in=50, seed=18), model)
    assert c.hex_rows() != a.hex_rows()


@pytest.mark.parametrize("algo", ALGORITHMS)
def test_counters(algo):
    from wwa.data import gen_cycle_dataset

    ds = gen_cycle_dataset(6, np.random.default_rng(1))
    tr = run_chain(ChainConfig(algorithm=algo, iterations=200, seed=3), Model.from_data(ds.Y))
    c = tr.counters
    assert np.all(np.diff(c, axis=0) >= 0)
    prom, acc, fsr, prior_draws, gw = c[-1]
    assert prom >= acc
    n_updates = 200 * 6

    if algo in ("wwa", "wwa-no-informed"):
        assert prior_draws == prom
        assert prom + fsr == n_updates
    elif algo in ("wwa-no-da", "exchange-plain"):
        assert prom == n_updates and fsr == 0 and prior_draws == prom
    elif algo == "dcbf":
        # One posterior and one prior draw per single-edge update.
        assert prior_draws == n_updates and gw == 2 * n_updates and fsr == 0


def test_threads_do_not_change_the_chain():
    from wwa.data import gen_cycle_dataset

    model = Model.from_data(gen_cycle_dataset(8, np.random.default_rng(2)).Y)
    a = run_chain(ChainConfig(iterations=100, seed=4, threads=1), model)
    b = run_chain(ChainConfig(iterations=100, seed=4, threads=3), model)
    assert a.hex_rows() == b.hex_rows()


def test_rejected_update_leaves_state_bit_identical():
    from wwa.data import gen_cycle_dataset

    model = Model.from_data(gen_cycle_dataset(6, np.random.default_rng(3)).Y)
    s = Sampler(ChainConfig(seed=8, n_e=1), model)
    rejected = 0

    for _ in range(300):
        K0, adj0 = s.K.copy(), s.adj.copy()
        acc0 = s.counters[kn.ACCEPTS]
        status = kn.wwa_iteration(
            s.adj, s.K, s.Sigma, s.delta, s.D0, s.delta_s, s.Ds, s.log_odds, s.approx_tab, 1,
            kn.WWA, s.tol, s.max_sweeps, s.mode, s.pi, s.pj, False, s.counters, s.info,
            s.bits, s.ksum, False, False,
        )
        assert status == 0

        if s.counters[kn.ACCEPTS] == acc0:
            rejected += 1
            assert np.array_equal(s.K, K0) and np.array_equal(s.adj, adj0)
        else:
            assert np.sum(s.adj != adj0) == 2

    assert rejected > 10


def test_step_functions():
    model = p3_model()
    cfg = ChainConfig(seed=1).resolved(3)
    state = ChainState(Graph.empty(3), np.eye(3))

    for step in (wwa_step, dcbf_step, cl_step):
        new, deltas = step(state, model, cfg, rng=np.random.default_rng(0))
        assert new.G.p == 3
        assert deltas["promotions"] >= deltas["accepts"]
        off = ~new.G.adj & ~np.eye(3, dtype=bool)
        assert np.all(new.K[off] == 0.0)


def test_track_k_posterior_mean():
    model = p3_model()
    tr = run_chain(ChainConfig(algorithm="wwa", iterations=2000, burn_in=100, seed=2, track_k=True), model)
    assert tr.k_hat.shape == (3, 3)
    assert np.all(np.linalg.eigvalsh(tr.k_hat) > 0)


@pytest.mark.parametrize("algo,cl_inner", [(a, "direct") for a in ALGORITHMS] + [("cl", "block-gibbs:10")])
def test_short_run_near_exact_posterior(algo, cl_inner):
    Y = p3_data()
    post = exact_posterior_p3(Y)
    cfg = ChainConfig(algorithm=algo, iterations=21000, burn_in=1000, seed=21, cl_inner=cl_inner)
    tr = run_chain(cfg, Model.from_data(Y)).recorded()
    assert total_variation(tr.hex_rows(), post) < 0.04


def test_bernoulli_prior_posterior():
    Y = p3_data(seed=8)
    rho = 0.2
    post = exact_posterior_p3(Y, log_odds=math.log(rho / (1 - rho)))
    model = Model.from_data(Y, graph_prior=GraphPrior("bernoulli", rho))
    tr = run_chain(ChainConfig(iterations=21000, burn_in=1000, seed=4), model).recorded()
    assert total_variation(tr.hex_rows(), post) < 0.04
