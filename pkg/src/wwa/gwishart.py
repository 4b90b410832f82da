"""
Sampling from the G-Wishart distribution W_G(delta, D).

Three samplers are provided:

* ``sample_direct``: the iterative fixed-point sampler that starts from a
  complete-graph Wishart draw and imposes the zero pattern on the inverse
  by cycling over nodes (Lenkoski, 2013).
* ``sample_decomposed``: splits the graph into connected components and,
  within a component, into clique-minimal-separator atoms. Complete atoms
  get Bartlett draws, incomplete ones the direct sampler, and atoms are
  glued through their (complete) separators on the precision scale.
* ``block_gibbs_sweep``: one sweep of the maximum-clique block Gibbs
  sampler, which leaves W_G(delta, D) invariant.

``log_I_decomposable`` gives the exact normalising constant for decomposable
graphs and serves as a test oracle.
"""

import math
from dataclasses import dataclass

import numpy as np
import scipy.special

from ._jit import njit
from ._random import seed_from
from .graph import (
    Graph,
    atom_decomposition,
    atoms_kernel,
    common_neighbor_count,
    components_kernel,
    is_clique,
    _check_pair,
)
from .linalg import (
    PD_TOL,
    NotPositiveDefiniteError,
    bartlett_into,
    chol_upper_into,
    inv_pd,
    solve_pd_into,
)

DECOMPOSITION_MODES = {"disabled": 0, "components-only": 1, "enabled": 2}

# Kernel status codes.
OK = 0
NOT_CONVERGED = 1
GUARD_FAILED = 2
NOT_PD = 3


class GWishartError(RuntimeError):
    pass


class GWishartConvergenceError(GWishartError):
    def __init__(self, message, residual):
        self.residual = residual
        super().__init__("%s (residual %.3g)" % (message, residual))


@dataclass(frozen=True)
class GWishartParams:
    delta: float
    D: np.ndarray

    def __post_init__(self):
        D = np.ascontiguousarray(self.D, dtype=np.float64)

        if not self.delta > 2:
            raise ValueError("degrees of freedom must exceed 2")

        if D.ndim != 2 or D.shape[0] != D.shape[1]:
            raise ValueError("rate matrix must be square")

        U = np.zeros_like(D)

        if chol_upper_into(D, U) >= 0:
            raise ValueError("rate matrix must be positive definite")

        object.__setattr__(self, "delta", float(self.delta))
        object.__setattr__(self, "D", D)

    @property
    def p(self):
        return self.D.shape[0]


@dataclass(frozen=True)
class PosteriorParams:
    """Conjugate update: delta* = delta + n, D* = D + Y'Y."""

    prior: GWishartParams
    n: int
    delta_star: float
    D_star: np.ndarray

    @classmethod
    def from_data(cls, prior, Y):
        Y = np.asarray(Y, dtype=np.float64)

        if Y.ndim != 2 or Y.shape[1] != prior.p:
            raise ValueError("data must be n x p with p=%d" % prior.p)

        n = Y.shape[0]
        D_star = np.ascontiguousarray(prior.D + Y.T @ Y)
        return cls(prior, n, prior.delta + n, D_star)

    @property
    def params(self):
        return GWishartParams(self.delta_star, self.D_star)


@dataclass(frozen=True)
class SamplerConfig:
    tol: float = 1e-8
    max_sweeps: int = 1000
    decomposition: str = "enabled"

    def __post_init__(self):
        if not self.tol > 0:
            raise ValueError("tol must be positive")

        if self.max_sweeps < 1:
            raise ValueError("max_sweeps must be positive")

        if self.decomposition not in DECOMPOSITION_MODES:
            raise ValueError("decomposition must be one of %s" % list(DECOMPOSITION_MODES))

    @property
    def mode(self):
        return DECOMPOSITION_MODES[self.decomposition]


# Kernels -----------------------------------------------------------------


@njit
def submatrix(A, idx):
    k = len(idx)
    out = np.empty((k, k), dtype=A.dtype)

    for a in range(k):
        for b in range(k):
            out[a, b] = A[idx[a], idx[b]]

    return out


@njit
def rgwish_direct_into(adj, delta, D, tol, max_sweeps, K):
    """
    Fixed-point G-Wishart sampler. Writes the draw into K and returns
    (status, residual): the last sweep's max-abs change, or for a guard
    failure the largest pre-clamp non-edge entry.
    """
    p = D.shape[0]
    status = bartlett_into(delta, D, K)

    if status >= 0:
        return NOT_PD, 0.0

    complete = True

    for i in range(p):
        for j in range(i + 1, p):
            if not adj[i, j]:
                complete = False

    if complete:
        return OK, 0.0

    Sigma, status = inv_pd(K)

    if status >= 0:
        return NOT_PD, 0.0

    W = Sigma.copy()
    deg = np.zeros(p, dtype=np.int64)
    nb = np.zeros((p, p), dtype=np.int64)

    for j in range(p):
        for k in range(p):
            if adj[j, k]:
                nb[j, deg[j]] = k
                deg[j] += 1

    U = np.zeros((p, p))
    beta = np.zeros(p)
    col = np.zeros(p)
    resid = np.inf
    converged = False

    for sweep in range(max_sweeps):
        resid = 0.0

        for j in range(p):
            d = deg[j]

            if d == 0:
                for k in range(p):
                    if k != j:
                        resid = max(resid, abs(W[k, j]))
                        W[k, j] = 0.0
                        W[j, k] = 0.0

                continue

            if not _neighbor_solve(W, Sigma, nb[j], j, d, U, beta):
                return NOT_PD, resid

            # W[-j, j] = W[-j, N] beta, accumulated row-wise (W is symmetric).
            col[:] = 0.0

            for a in range(d):
                row = W[nb[j, a]]
                b = beta[a]

                for k in range(p):
                    col[k] += row[k] * b

            for k in range(p):
                if k != j:
                    resid = max(resid, abs(col[k] - W[k, j]))
                    W[k, j] = col[k]
                    W[j, k] = col[k]

        if resid < tol:
            converged = True
            break

    if not converged:
        # Slow linear convergence (ill-conditioned draws): finish the same
        # completion problem with Newton's method.
        Kn, status = inv_pd(W)

        if status >= 0 or not _clamp_pd(Kn, adj):
            Kn = np.zeros((p, p))

            for i in range(p):
                Kn[i, i] = 1.0 / Sigma[i, i]

        status, resid = newton_completion(adj, Sigma, Kn, tol, 100)

        if status != OK:
            return status, resid

        K[:, :] = Kn
        return OK, resid

    Kn, status = inv_pd(W)

    if status >= 0:
        return NOT_PD, resid

    scale = 1.0

    for i in range(p):
        scale = max(scale, Kn[i, i] * Kn[i, i])

    worst = 0.0

    for i in range(p):
        for j in range(p):
            if i != j and not adj[i, j]:
                worst = max(worst, abs(Kn[i, j]))
                Kn[i, j] = 0.0

    K[:, :] = Kn

    if worst >= 100.0 * tol * scale:
        return GUARD_FAILED, worst

    return OK, resid


@njit
def _neighbor_solve(W, Sigma, nbj, j, d, U, beta):
    """Solve W[N,N] beta = Sigma[N,j] for the neighbours N = nbj[:d]."""
    for c in range(d):
        s = W[nbj[c], nbj[c]]

        for k in range(c):
            s -= U[k, c] * U[k, c]

        if not s > PD_TOL * PD_TOL:
            return False

        dd = math.sqrt(s)
        U[c, c] = dd

        for i in range(c + 1, d):
            t = W[nbj[c], nbj[i]]

            for k in range(c):
                t -= U[k, c] * U[k, i]

            U[c, i] = t / dd

    for i in range(d):
        s = Sigma[nbj[i], j]

        for k in range(i):
            s -= U[k, i] * beta[k]

        beta[i] = s / U[i, i]

    for i in range(d - 1, -1, -1):
        s = beta[i]

        for k in range(i + 1, d):
            s -= U[i, k] * beta[k]

        beta[i] = s / U[i, i]

    return True


@njit
def _clamp_pd(K, adj):
    p = K.shape[0]

    for i in range(p):
        for j in range(p):
            if i != j and not adj[i, j]:
                K[i, j] = 0.0

    U = np.zeros((p, p))
    return chol_upper_into(K, U) < 0


@njit
def _completion_residual(W, Sigma, fa, fb):
    r = 0.0

    for f in range(len(fa)):
        r = max(r, abs(W[fa[f], fb[f]] - Sigma[fa[f], fb[f]]))

    return r


@njit
def newton_completion(adj, Sigma, K, tol, max_iter):
    """
    Find K in M+(G) with inv(K) matching Sigma on the diagonal and the edges
    of G, by damped Newton steps on the free entries of K starting from the
    PD matrix K (updated in place). Returns (status, residual).
    """
    p = K.shape[0]
    n_free = p

    for a in range(p):
        for b in range(a + 1, p):
            if adj[a, b]:
                n_free += 1

    fa = np.empty(n_free, dtype=np.int64)
    fb = np.empty(n_free, dtype=np.int64)
    f = 0

    for a in range(p):
        fa[f] = a
        fb[f] = a
        f += 1

        for b in range(a + 1, p):
            if adj[a, b]:
                fa[f] = a
                fb[f] = b
                f += 1

    W, status = inv_pd(K)

    if status >= 0:
        return NOT_PD, np.inf

    resid = _completion_residual(W, Sigma, fa, fb)
    H = np.empty((n_free, n_free))
    r = np.empty(n_free)
    Kn = np.empty((p, p))

    for it in range(max_iter):
        if resid < tol:
            return OK, resid

        # Linearisation: inv(K + Delta) ~ W - W Delta W.
        for f1 in range(n_free):
            c = fa[f1]
            d = fb[f1]
            r[f1] = W[c, d] - Sigma[c, d]

            for f2 in range(n_free):
                a = fa[f2]
                b = fb[f2]

                if a == b:
                    H[f1, f2] = W[c, a] * W[a, d]
                else:
                    H[f1, f2] = W[c, a] * W[b, d] + W[c, b] * W[a, d]

        step = np.linalg.solve(H, r)
        t = 1.0
        improved = False

        while t > 1e-12:
            Kn[:, :] = K

            for f2 in range(n_free):
                a = fa[f2]
                b = fb[f2]
                Kn[a, b] += t * step[f2]

                if a != b:
                    Kn[b, a] += t * step[f2]

            Wn, status = inv_pd(Kn)

            if status < 0:
                new_resid = _completion_residual(Wn, Sigma, fa, fb)

                if new_resid < resid:
                    K[:, :] = Kn
                    W = Wn
                    resid = new_resid
                    improved = True
                    break

            t *= 0.5

        if not improved:
            break

    if resid < tol:
        return OK, resid

    return NOT_CONVERGED, resid


@njit
def _rgwish_component(adj, delta, D, tol, max_sweeps, mode, K):
    """Draw for one connected component (local indexing)."""
    n = D.shape[0]
    verts = np.arange(n)

    if n == 1 or is_clique(adj, verts):
        status = bartlett_into(delta, D, K)
        return (NOT_PD if status >= 0 else OK), 0.0

    if mode < 2:
        return rgwish_direct_into(adj, delta, D, tol, max_sweeps, K)

    a_ptr, a_verts, s_ptr, s_verts = atoms_kernel(adj)
    n_atoms = len(a_ptr) - 1

    if n_atoms == 1:
        return rgwish_direct_into(adj, delta, D, tol, max_sweeps, K)

    K[:, :] = 0.0
    worst = 0.0

    for t in range(n_atoms):
        P = a_verts[a_ptr[t]:a_ptr[t + 1]]
        S = s_verts[s_ptr[t]:s_ptr[t + 1]]
        k = len(P)
        KP = np.empty((k, k))
        adjP = submatrix(adj, P)
        DP = submatrix(D, P)

        if is_clique(adj, P):
            if bartlett_into(delta, DP, KP) >= 0:
                return NOT_PD, 0.0
        else:
            status, resid = rgwish_direct_into(adjP, delta, DP, tol, max_sweeps, KP)

            if status != OK:
                return status, resid

            worst = max(worst, resid)

        if t == 0:
            for a in range(k):
                for b in range(k):
                    K[P[a], P[b]] = KP[a, b]

            continue

        # Local positions of the residual R = P \ S and of S inside P.
        in_s = np.zeros(k, dtype=np.bool_)

        for a in range(k):
            for s in S:
                if P[a] == s:
                    in_s[a] = True

        r_loc = np.flatnonzero(~in_s)
        s_loc = np.flatnonzero(in_s)
        nr = len(r_loc)
        ns = len(s_loc)
        KRR = np.empty((nr, nr))
        KRS = np.empty((nr, ns))

        for a in range(nr):
            for b in range(nr):
                KRR[a, b] = KP[r_loc[a], r_loc[b]]

            for b in range(ns):
                KRS[a, b] = KP[r_loc[a], s_loc[b]]

        for a in range(nr):
            for b in range(nr):
                K[P[r_loc[a]], P[r_loc[b]]] = KRR[a, b]

            for b in range(ns):
                K[P[r_loc[a]], P[s_loc[b]]] = KRS[a, b]
                K[P[s_loc[b]], P[r_loc[a]]] = KRS[a, b]

        # S block gains K_SR inv(K_RR) K_RS so the marginal of the earlier
        # atoms is left untouched.
        if ns > 0:
            X = np.empty((nr, ns))
            U = np.zeros((nr, nr))
            col = np.empty(nr)

            for b in range(ns):
                if solve_pd_into(KRR, KRS[:, b].copy(), col, U) >= 0:
                    return NOT_PD, 0.0

                X[:, b] = col

            for a in range(ns):
                for b in range(ns):
                    s = 0.0

                    for m in range(nr):
                        s += KRS[m, a] * X[m, b]

                    K[P[s_loc[a]], P[s_loc[b]]] += s

    return OK, worst


@njit
def rgwish_into(adj, delta, D, tol, max_sweeps, mode, K):
    """
    G-Wishart draw into K. ``mode``: 0 direct on the whole graph,
    1 per connected component, 2 per component and atom.
    """
    if mode == 0:
        return rgwish_direct_into(adj, delta, D, tol, max_sweeps, K)

    label, n_comp = components_kernel(adj)
    K[:, :] = 0.0
    worst = 0.0

    for c in range(n_comp):
        idx = np.flatnonzero(label == c)
        k = len(idx)
        Kc = np.empty((k, k))
        status, resid = _rgwish_component(
            submatrix(adj, idx), delta, submatrix(D, idx), tol, max_sweeps, mode, Kc
        )

        if status != OK:
            return status, resid

        worst = max(worst, resid)

        for a in range(k):
            for b in range(k):
                K[idx[a], idx[b]] = Kc[a, b]

    return OK, worst


@njit
def block_gibbs_into(K, adj, delta, D, c_ptr, c_verts):
    """
    One maximum-clique block Gibbs sweep, in place. For each clique C the
    Schur complement K_CC - K_C,R inv(K_RR) K_R,C is replaced by a fresh
    complete Wishart(delta, D_CC) draw. Returns a Cholesky status.
    """
    p = K.shape[0]

    for t in range(len(c_ptr) - 1):
        C = c_verts[c_ptr[t]:c_ptr[t + 1]]
        k = len(C)
        in_c = np.zeros(p, dtype=np.bool_)

        for v in C:
            in_c[v] = True

        R = np.flatnonzero(~in_c)
        r = len(R)
        A = np.zeros((k, k))

        if r > 0:
            KRR = submatrix(K, R)
            U = np.zeros((r, r))
            col = np.empty(r)
            X = np.empty((r, k))

            for b in range(k):
                rhs = np.empty(r)

                for a in range(r):
                    rhs[a] = K[R[a], C[b]]

                if solve_pd_into(KRR, rhs, col, U) >= 0:
                    return NOT_PD

                X[:, b] = col

            for a in range(k):
                for b in range(a, k):
                    s = 0.0

                    for m in range(r):
                        s += K[C[a], R[m]] * X[m, b]

                    A[a, b] = s
                    A[b, a] = s

        W = np.empty((k, k))

        if bartlett_into(delta, submatrix(D, C), W) >= 0:
            return NOT_PD

        for a in range(k):
            for b in range(k):
                K[C[a], C[b]] = W[a, b] + A[a, b]

    return OK


@njit
def approx_log_ratio_kernel(delta, d, sign):
    return sign * (
        math.lgamma(0.5 * (delta + d))
        - math.lgamma(0.5 * (delta + d + 1.0))
        - math.log(2.0 * math.sqrt(math.pi))
    )


# Public API -----------------------------------------------------------------


def _raise_for(status, resid):
    if status == NOT_CONVERGED:
        raise GWishartConvergenceError("fixed-point iteration did not converge", resid)

    if status == GUARD_FAILED:
        raise GWishartConvergenceError("non-edge entries not driven to zero", resid)

    if status == NOT_PD:
        raise GWishartError("lost positive definiteness while sampling")


def _check(G, params):
    if G.p != params.p:
        raise ValueError("graph has p=%d but rate matrix is %dx%d" % (G.p, params.p, params.p))


def _draw(G, params, cfg, rng, mode):
    _check(G, params)
    K = np.empty((G.p, G.p))
    seed_from(rng)

    if mode is None:
        status, resid = rgwish_direct_into(
            G.adj, params.delta, params.D, cfg.tol, cfg.max_sweeps, K
        )
    else:
        status, resid = rgwish_into(
            G.adj, params.delta, params.D, cfg.tol, cfg.max_sweeps, mode, K
        )

    _raise_for(status, resid)
    return K


def sample_direct(G, params, cfg=None, rng=None):
    """One draw from W_G(delta, D) with the fixed-point sampler on the whole graph."""
    return _draw(G, params, cfg or SamplerConfig(), _rng(rng), None)


def sample_decomposed(G, params, cfg=None, rng=None):
    """
    One draw from W_G(delta, D) using graph decomposition. With
    ``cfg.decomposition == "disabled"`` this is :func:`sample_direct`.
    """
    cfg = cfg or SamplerConfig()
    return _draw(G, params, cfg, _rng(rng), cfg.mode)


def sample_posterior(G, post, cfg=None, rng=None):
    """Draw K | G, Y ~ W_G(delta*, D*)."""
    return sample_decomposed(G, post.params, cfg, rng)


def block_gibbs_sweep(K, G, params, cliques=None, rng=None):
    """One maximum-clique block Gibbs sweep started from K in M+(G)."""
    _check(G, params)
    K = np.array(K, dtype=np.float64)
    off = ~G.adj & ~np.eye(G.p, dtype=bool)

    if np.any(K[off] != 0.0):
        raise ValueError("K has non-zero entries outside the graph's edges")

    if cliques is None:
        from .graph import maximal_cliques

        cliques = maximal_cliques(G)

    c_ptr = np.cumsum([0] + [len(c) for c in cliques]).astype(np.int64)
    c_verts = np.array([v for c in cliques for v in c], dtype=np.int64)
    seed_from(_rng(rng))

    if block_gibbs_into(K, G.adj, params.delta, params.D, c_ptr, c_verts) != OK:
        raise NotPositiveDefiniteError(0)

    return K


def approx_log_ratio(G, e, direction, delta, variant="mohammadi"):
    """
    log of the approximation to I_G(delta, D) / I_G~(delta, D) for the
    single-edge move at ``e``; ``variant="unit"`` approximates the ratio by 1.
    """
    if direction not in ("add", "remove"):
        raise ValueError("direction must be 'add' or 'remove'")

    if variant == "unit":
        return 0.0

    if variant != "mohammadi":
        raise ValueError("unknown approximation variant %r" % variant)

    d = common_neighbor_count(G, e)
    return approx_log_ratio_kernel(float(delta), float(d), 1.0 if direction == "add" else -1.0)


def log_I_complete(delta, D):
    """log normalising constant of the complete-graph density on k nodes."""
    D = np.atleast_2d(np.asarray(D, dtype=np.float64))
    k = D.shape[0]

    if k == 0:
        return 0.0

    nu = delta + k - 1.0
    sign, logdet = np.linalg.slogdet(D)

    if sign <= 0:
        raise NotPositiveDefiniteError(0)

    return 0.5 * nu * k * math.log(2.0) - 0.5 * nu * logdet + scipy.special.multigammaln(0.5 * nu, k)


def log_I_decomposable(G, params):
    """Exact log I_G(delta, D) for decomposable G via its clique/separator factorisation."""
    _check(G, params)
    dec = atom_decomposition(G)

    if not dec.is_decomposable():
        raise ValueError("graph is not decomposable")

    total = 0.0

    for atoms, seps in zip(dec.atoms, dec.separators):
        for a, s in zip(atoms, seps):
            total += log_I_complete(params.delta, params.D[np.ix_(a, a)])
            total -= log_I_complete(params.delta, params.D[np.ix_(s, s)])

    return total


def _rng(rng):
    if rng is None:
        return np.random.default_rng()

    if isinstance(rng, (int, np.integer)):
        return np.random.default_rng(rng)

    return rng
