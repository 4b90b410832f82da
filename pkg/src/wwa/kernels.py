"""
Compiled building blocks of the graph samplers.

A chain state is (adj, K, Sigma) with Sigma = inv(K). Everything an
edge-specific move needs from the reordered Cholesky factor Phi of K (the
endpoints i, j moved to the last two positions) is read off Sigma: the
trailing 2x2 block of Phi.T @ Phi is the Schur complement of K on {i, j},
which is the inverse of Sigma[{i,j},{i,j}]. This gives every candidate of a
neighbourhood scan in O(1) after one O(p^3) inversion.

With ``a, b, c = Sigma_ii, Sigma_ij, Sigma_jj`` and ``det = a c - b^2``:

    phi11 = sqrt(c / det)          (Phi_{p-1,p-1})
    phi12 = -b / det / phi11       (Phi_{p-1,p})
    cross = K_ij - phi11 phi12     (sum_l Phi_{l,p-1} Phi_{l,p})
    rest  = K_jj - a / det         (sum_l Phi_{l,p}^2)

A move replaces (phi12, phi22) and so only touches K_ij and K_jj.
"""

import math

import numpy as np

from ._jit import njit, prange
from ._random import chisq, normal, randint, uniform
from .graph import cliques_kernel
from .gwishart import (
    NOT_PD,
    OK,
    approx_log_ratio_kernel,
    block_gibbs_into,
    rgwish_into,
)
from .linalg import inv_pd

LOG_2PI = math.log(2.0 * math.pi)

# Counter slots.
PROMOTIONS = 0
ACCEPTS = 1
FIRST_STAGE_REJECTIONS = 2
PRIOR_DRAWS = 3
GWISHART_DRAWS = 4
N_COUNTERS = 5

# WWA family variants.
WWA = 0
WWA_NO_INFORMED = 1
WWA_NO_DA = 2
EXCHANGE_PLAIN = 3


@njit
def log_N(phi11, cross, Dij, Djj):
    t = phi11 * Dij / Djj - cross / phi11
    return math.log(phi11) + 0.5 * (LOG_2PI - math.log(Djj)) + 0.5 * Djj * t * t


@njit
def edge_terms(K, Sigma, i, j):
    a = Sigma[i, i]
    b = Sigma[i, j]
    c = Sigma[j, j]
    det = a * c - b * b
    phi11 = math.sqrt(c / det)
    phi12 = -b / det / phi11
    cross = K[i, j] - phi11 * phi12
    rest = K[j, j] - a / det
    return phi11, phi12, cross, rest


@njit
def log_g(x):
    """log of g(t) = t / (1 + t) at t = exp(x), i.e. -softplus(-x)."""
    if x >= 0.0:
        return -math.log1p(math.exp(-x))

    return x - math.log1p(math.exp(x))


@njit
def log_base_q(n_edges, m_max, s):
    """log q(G~|G) for a flip of sign s (+1 add, -1 remove) from a graph with n_edges."""
    if n_edges == 0 or n_edges == m_max:
        return -math.log(m_max)

    if s < 0:
        return -math.log(2.0 * n_edges)

    return -math.log(2.0 * (m_max - n_edges))


@njit
def log_uniform():
    return math.log(1.0 - uniform())


@njit
def logsumexp(x):
    mx = -np.inf

    for v in x:
        if v > mx:
            mx = v

    s = 0.0

    for v in x:
        s += math.exp(v - mx)

    return mx + math.log(s)


@njit
def count_edges(adj):
    p = adj.shape[0]
    n = 0

    for i in range(p):
        for j in range(i + 1, p):
            if adj[i, j]:
                n += 1

    return n


@njit
def common_neighbors(adj, i, j):
    d = 0

    for k in range(adj.shape[0]):
        if adj[i, k] and adj[j, k]:
            d += 1

    return d


@njit
def candidate_log_rhat(adj, K, Sigma, i, j, Ds, log_odds, approx_tab):
    s = -1.0 if adj[i, j] else 1.0
    phi11, phi12, cross, rest = edge_terms(K, Sigma, i, j)
    d = common_neighbors(adj, i, j)
    return s * (log_odds + log_N(phi11, cross, Ds[i, j], Ds[j, j]) + approx_tab[d])


@njit
def _weight(adj, K, Sigma, Ds, log_odds, approx_tab, i, j, n_edges, m):
    lr = candidate_log_rhat(adj, K, Sigma, i, j, Ds, log_odds, approx_tab)
    return lr, log_g(lr) + log_base_q(n_edges, m, -1 if adj[i, j] else 1)


@njit
def _scan_serial(adj, K, Sigma, Ds, log_odds, approx_tab, pi, pj, n_edges, logw, lrh):
    m = len(pi)

    for k in range(m):
        lrh[k], logw[k] = _weight(adj, K, Sigma, Ds, log_odds, approx_tab, pi[k], pj[k], n_edges, m)


@njit(parallel=True)
def _scan_parallel(adj, K, Sigma, Ds, log_odds, approx_tab, pi, pj, n_edges, logw, lrh):
    m = len(pi)

    for k in prange(m):
        lrh[k], logw[k] = _weight(adj, K, Sigma, Ds, log_odds, approx_tab, pi[k], pj[k], n_edges, m)


@njit
def scan(adj, K, Sigma, Ds, log_odds, approx_tab, pi, pj, n_edges, parallel, logw, lrh):
    """
    Informed-proposal weights log g(R^) + log q for every neighbour, written
    into logw (and log R^ into lrh). Returns the log normalising constant.
    Candidates are independent, and the reduction is sequential, so the
    result does not depend on the number of threads.
    """
    if parallel:
        _scan_parallel(adj, K, Sigma, Ds, log_odds, approx_tab, pi, pj, n_edges, logw, lrh)
    else:
        _scan_serial(adj, K, Sigma, Ds, log_odds, approx_tab, pi, pj, n_edges, logw, lrh)

    return logsumexp(logw)


@njit
def select(logw, logZ, u):
    acc = 0.0
    last = 0

    for k in range(len(logw)):
        w = math.exp(logw[k] - logZ)

        if w > 0.0:
            last = k

        acc += w

        if u < acc:
            return k

    return last


@njit
def base_select(adj, n_edges, pi, pj):
    """Draw a pair from the base proposal q(.|G)."""
    m = len(pi)

    if n_edges == 0 or n_edges == m:
        return randint(m)

    want = uniform() < 0.5
    target = randint(n_edges if want else m - n_edges)
    seen = 0

    for k in range(m):
        if adj[pi[k], pj[k]] == want:
            if seen == target:
                return k

            seen += 1

    return m - 1


@njit
def pack_bits(adj, pi, pj, out):
    out[:] = 0

    for k in range(len(pi)):
        if adj[pi[k], pj[k]]:
            out[k >> 6] |= np.uint64(1) << np.uint64(k & 63)


@njit
def _flip(adj, i, j):
    v = not adj[i, j]
    adj[i, j] = v
    adj[j, i] = v


@njit
def _store(adj, K, pi, pj, bits, ksum, accum, info, n_edges):
    pack_bits(adj, pi, pj, bits)
    info[1] = n_edges

    if accum:
        ksum += K


@njit
def _log_N_of(K, i, j, D):
    """log N for a freshly drawn K (inverting it first)."""
    S, status = inv_pd(K)

    if status >= 0:
        return np.nan

    phi11, phi12, cross, rest = edge_terms(K, S, i, j)
    return log_N(phi11, cross, D[i, j], D[j, j])


@njit
def _propose_free(K, i, j, s, phi11, cross, rest, delta_s, Ds, Kt):
    """
    K~ = K with (Phi_{p-1,p}, Phi_pp) replaced by draws from their
    conditionals under the flipped graph (Phi_pp first).
    """
    phi22 = math.sqrt(chisq(delta_s) / Ds[j, j])

    if s > 0:
        phi12 = -phi11 * Ds[i, j] / Ds[j, j] + normal() / math.sqrt(Ds[j, j])
        kij = cross + phi11 * phi12
    else:
        phi12 = -cross / phi11
        kij = 0.0

    Kt[:, :] = K
    Kt[i, j] = kij
    Kt[j, i] = kij
    Kt[j, j] = rest + phi12 * phi12 + phi22 * phi22


@njit
def wwa_iteration(
    adj, K, Sigma, delta, D0, delta_s, Ds, log_odds, approx_tab, n_e, variant,
    tol, max_sweeps, mode, pi, pj, parallel, counters, info, bits, ksum, accum, refresh=True,
):
    """
    One iteration of WWA or one of its ablations: a posterior refresh of K
    followed by n_e single-edge updates. Returns a status code; on failure
    info[0] holds the sampler residual. ``refresh=False`` skips the refresh
    (used to inspect single updates).
    """
    p = K.shape[0]
    m = len(pi)

    if refresh:
        status, resid = rgwish_into(adj, delta_s, Ds, tol, max_sweeps, mode, K)
        counters[GWISHART_DRAWS] += 1

        if status != OK:
            info[0] = resid
            return status

    S, st = inv_pd(K)

    if st >= 0:
        return NOT_PD

    Sigma[:, :] = S
    n_edges = count_edges(adj)
    informed = variant == WWA or variant == WWA_NO_DA
    use_da = variant == WWA or variant == WWA_NO_INFORMED
    logw = np.empty(m)
    lrh = np.empty(m)
    logw_r = np.empty(m)
    lrh_r = np.empty(m)
    Kt = np.empty((p, p))
    K0 = np.empty((p, p))
    St = Sigma
    logq_f = 0.0
    logZ = 0.0
    logZr = 0.0

    # The forward scan at (G, K) is computed once after the refresh. A
    # rejection leaves the state untouched and an acceptance moves it to
    # (G~, K~), whose scan is the reverse scan just computed, so neither
    # needs a new forward scan.
    if informed:
        logZ = scan(adj, K, Sigma, Ds, log_odds, approx_tab, pi, pj, n_edges, parallel, logw, lrh)

    for t in range(n_e):
        lr = 0.0

        if informed:
            k = select(logw, logZ, uniform())
            lr = lrh[k]
            logq_f = logw[k] - logZ
        else:
            k = base_select(adj, n_edges, pi, pj)

            if use_da:
                lr = candidate_log_rhat(adj, K, Sigma, pi[k], pj[k], Ds, log_odds, approx_tab)

        i = pi[k]
        j = pj[k]
        s = -1 if adj[i, j] else 1

        if not informed:
            logq_f = log_base_q(n_edges, m, s)

        phi11, phi12, cross, rest = edge_terms(K, Sigma, i, j)
        lN = log_N(phi11, cross, Ds[i, j], Ds[j, j])
        _propose_free(K, i, j, s, phi11, cross, rest, delta_s, Ds, Kt)
        _flip(adj, i, j)
        nt = n_edges + s
        have_st = False

        if informed:
            St, st = inv_pd(Kt)

            if st >= 0:
                _flip(adj, i, j)
                return NOT_PD

            have_st = True
            logZr = scan(adj, Kt, St, Ds, log_odds, approx_tab, pi, pj, nt, parallel, logw_r, lrh_r)
            logq_r = logw_r[k] - logZr
        else:
            logq_r = log_base_q(nt, m, -s)

        lrda = lr + logq_r - logq_f

        if use_da and log_uniform() >= min(0.0, lrda):
            counters[FIRST_STAGE_REJECTIONS] += 1
            _flip(adj, i, j)
            continue

        counters[PROMOTIONS] += 1
        status, resid = rgwish_into(adj, delta, D0, tol, max_sweeps, mode, K0)
        counters[PRIOR_DRAWS] += 1
        counters[GWISHART_DRAWS] += 1

        if status != OK:
            _flip(adj, i, j)
            info[0] = resid
            return status

        lN0 = _log_N_of(K0, i, j, D0)

        if math.isnan(lN0):
            _flip(adj, i, j)
            return NOT_PD

        lacc = s * (log_odds + lN - lN0) + logq_r - logq_f

        if use_da:
            lacc += min(0.0, -lrda) - min(0.0, lrda)

        if log_uniform() < min(0.0, lacc):
            if not have_st:
                St, st = inv_pd(Kt)

                if st >= 0:
                    _flip(adj, i, j)
                    return NOT_PD

            K[:, :] = Kt
            Sigma[:, :] = St
            n_edges = nt
            counters[ACCEPTS] += 1

            if informed:
                logw, logw_r = logw_r, logw
                lrh, lrh_r = lrh_r, lrh
                logZ = logZr
        else:
            _flip(adj, i, j)

    _store(adj, K, pi, pj, bits, ksum, accum, info, n_edges)
    return OK


@njit
def dcbf_iteration(
    adj, K, delta, D0, delta_s, Ds, log_odds, n_e, sweep, want_k,
    tol, max_sweeps, mode, pi, pj, counters, info, bits, ksum, accum,
):
    """
    One DCBF iteration: n_e uniformly drawn pairs (or one ordered sweep over
    all pairs), each with a fresh posterior draw at G and a prior draw at G~.
    """
    p = K.shape[0]
    m = len(pi)
    n_edges = count_edges(adj)
    Kp = np.empty((p, p))
    K0 = np.empty((p, p))
    n_updates = m if sweep else n_e

    for t in range(n_updates):
        k = t if sweep else randint(m)
        i = pi[k]
        j = pj[k]
        s = -1 if adj[i, j] else 1
        status, resid = rgwish_into(adj, delta_s, Ds, tol, max_sweeps, mode, Kp)
        counters[GWISHART_DRAWS] += 1

        if status != OK:
            info[0] = resid
            return status

        lN = _log_N_of(Kp, i, j, Ds)
        _flip(adj, i, j)
        status, resid = rgwish_into(adj, delta, D0, tol, max_sweeps, mode, K0)
        counters[GWISHART_DRAWS] += 1
        counters[PRIOR_DRAWS] += 1
        counters[PROMOTIONS] += 1

        if status != OK:
            _flip(adj, i, j)
            info[0] = resid
            return status

        lN0 = _log_N_of(K0, i, j, D0)

        if math.isnan(lN) or math.isnan(lN0):
            _flip(adj, i, j)
            return NOT_PD

        if log_uniform() < min(0.0, s * (log_odds + lN - lN0)):
            n_edges += s
            counters[ACCEPTS] += 1
        else:
            _flip(adj, i, j)

    if want_k:
        # DCBF keeps no precision matrix between updates; draw one for the
        # posterior-mean estimate.
        status, resid = rgwish_into(adj, delta_s, Ds, tol, max_sweeps, mode, K)
        counters[GWISHART_DRAWS] += 1

        if status != OK:
            info[0] = resid
            return status

    _store(adj, K, pi, pj, bits, ksum, accum, info, n_edges)
    return OK


@njit
def cl_iteration(
    adj, K, Sigma, delta, D0, delta_s, Ds, log_odds, n_e, inner_sweeps,
    tol, max_sweeps, mode, pi, pj, counters, info, bits, ksum, accum,
):
    """
    One CL iteration. Each of n_e random pairs gets a Barker first stage on
    the odds p(G~)/p(G) N^s, an exchange second stage with an auxiliary prior
    draw (exact sampler if inner_sweeps == 0, else that many block Gibbs
    sweeps started from the current K), and a Gibbs update of the two free
    Cholesky entries. The iteration ends with a refresh of K.
    """
    p = K.shape[0]
    m = len(pi)
    n_edges = count_edges(adj)
    K0 = np.empty((p, p))

    for t in range(n_e):
        k = randint(m)
        i = pi[k]
        j = pj[k]
        s = -1 if adj[i, j] else 1
        phi11, phi12, cross, rest = edge_terms(K, Sigma, i, j)
        lN = log_N(phi11, cross, Ds[i, j], Ds[j, j])

        if log_uniform() < log_g(s * (log_odds + lN)):
            counters[PROMOTIONS] += 1
            _flip(adj, i, j)

            if inner_sweeps == 0:
                status, resid = rgwish_into(adj, delta, D0, tol, max_sweeps, mode, K0)

                if status != OK:
                    _flip(adj, i, j)
                    info[0] = resid
                    return status
            else:
                K0[:, :] = K

                if s < 0:
                    # Zero-fill the removed edge, keeping Phi_pp, so the
                    # start lies in M+(G~).
                    K0[i, j] = 0.0
                    K0[j, i] = 0.0
                    K0[j, j] = K[j, j] - phi12 * phi12 + (cross / phi11) ** 2

                c_ptr, c_verts = cliques_kernel(adj)

                for sweep in range(inner_sweeps):
                    if block_gibbs_into(K0, adj, delta, D0, c_ptr, c_verts) != OK:
                        _flip(adj, i, j)
                        return NOT_PD

            counters[PRIOR_DRAWS] += 1
            counters[GWISHART_DRAWS] += 1
            lN0 = _log_N_of(K0, i, j, D0)

            if math.isnan(lN0):
                _flip(adj, i, j)
                return NOT_PD

            if log_uniform() < min(0.0, -s * lN0):
                n_edges += s
                counters[ACCEPTS] += 1
            else:
                _flip(adj, i, j)
        else:
            counters[FIRST_STAGE_REJECTIONS] += 1

        # Gibbs update of (Phi_{p-1,p}, Phi_pp) under the current graph.
        _propose_free(K, i, j, 1 if adj[i, j] else -1, phi11, cross, rest, delta_s, Ds, K0)
        K[:, :] = K0
        S, st = inv_pd(K)

        if st >= 0:
            return NOT_PD

        Sigma[:, :] = S

    if inner_sweeps == 0:
        status, resid = rgwish_into(adj, delta_s, Ds, tol, max_sweeps, mode, K)

        if status != OK:
            info[0] = resid
            return status
    else:
        c_ptr, c_verts = cliques_kernel(adj)

        if block_gibbs_into(K, adj, delta_s, Ds, c_ptr, c_verts) != OK:
            return NOT_PD

    counters[GWISHART_DRAWS] += 1
    S, st = inv_pd(K)

    if st >= 0:
        return NOT_PD

    Sigma[:, :] = S
    _store(adj, K, pi, pj, bits, ksum, accum, info, n_edges)
    return OK


def approx_table(delta, p, variant):
    """log approximation of I_G/I_G~ for an addition, indexed by the common-neighbour count."""
    if variant == "unit":
        return np.zeros(max(p - 1, 1))

    if variant != "mohammadi":
        raise ValueError("unknown approximation variant %r" % variant)

    return np.array(
        [approx_log_ratio_kernel(float(delta), float(d), 1.0) for d in range(max(p - 1, 1))]
    )
