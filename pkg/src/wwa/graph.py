"""
Undirected graphs on p labelled nodes, priors on graph space, and graph
decompositions (connected components, maximal cliques, clique minimal
separator atoms).

Nodes are 0-based in memory. Serialised forms (edge lists, the hex trace
encoding) are 1-based, see :meth:`Graph.to_edge_list` and
:meth:`Graph.to_hex`.
"""

import math
from dataclasses import dataclass, field

import numpy as np

from ._jit import njit


class Graph:
    """Immutable simple undirected graph backed by a boolean adjacency matrix."""

    __slots__ = ("_adj", "_n_edges")

    def __init__(self, adj):
        adj = np.array(adj, dtype=bool)

        if adj.ndim != 2 or adj.shape[0] != adj.shape[1] or adj.shape[0] < 1:
            raise ValueError("adjacency must be a non-empty square matrix")

        if np.any(np.diag(adj)):
            raise ValueError("self-loops are not allowed")

        if not np.array_equal(adj, adj.T):
            raise ValueError("adjacency must be symmetric")

        adj.setflags(write=False)
        self._adj = adj
        self._n_edges = int(np.triu(adj, 1).sum())

    @classmethod
    def empty(cls, p):
        return cls(np.zeros((p, p), dtype=bool))

    @classmethod
    def complete(cls, p):
        return cls(~np.eye(p, dtype=bool))

    @classmethod
    def cycle(cls, p):
        if p < 3:
            raise ValueError("a cycle needs at least 3 nodes")

        return cls.from_edges(p, [(i, (i + 1) % p) for i in range(p)])

    @classmethod
    def from_edges(cls, p, edges):
        adj = np.zeros((p, p), dtype=bool)

        for i, j in edges:
            i, j = _check_pair(p, i, j)
            adj[i, j] = adj[j, i] = True

        return cls(adj)

    @property
    def p(self):
        return self._adj.shape[0]

    @property
    def adj(self):
        """Read-only boolean adjacency matrix."""
        return self._adj

    @property
    def n_edges(self):
        return self._n_edges

    @property
    def m_max(self):
        return self.p * (self.p - 1) // 2

    def has_edge(self, i, j):
        i, j = _check_pair(self.p, i, j)
        return bool(self._adj[i, j])

    def edges(self):
        """Edges as (i, j) pairs with i < j, in row-major order."""
        i, j = np.nonzero(np.triu(self._adj, 1))
        return list(zip(i.tolist(), j.tolist()))

    def neighbors(self, i):
        return np.flatnonzero(self._adj[i])

    def flip(self, e):
        return flip_edge(self, e)

    def is_complete(self):
        return self._n_edges == self.m_max

    def subgraph(self, nodes):
        nodes = np.asarray(nodes, dtype=np.int64)
        return Graph(self._adj[np.ix_(nodes, nodes)])

    # Serialisation -------------------------------------------------------

    def to_bits(self):
        """Upper-triangular incidence in row-major order: (0,1), (0,2), ..."""
        return self._adj[np.triu_indices(self.p, 1)]

    @classmethod
    def from_bits(cls, p, bits):
        bits = np.asarray(bits, dtype=bool)

        if bits.shape != (p * (p - 1) // 2,):
            raise ValueError("bit vector has wrong length for p=%d" % p)

        adj = np.zeros((p, p), dtype=bool)
        adj[np.triu_indices(p, 1)] = bits
        return cls(adj | adj.T)

    def to_hex(self):
        """Bit k of the integer is the k-th pair in row-major order."""
        return bits_to_hex(self.to_bits())

    @classmethod
    def from_hex(cls, p, text):
        m = p * (p - 1) // 2
        value = int(text, 16)

        if value >> m:
            raise ValueError("hex string has bits beyond m_max=%d" % m)

        bits = np.array([(value >> k) & 1 for k in range(m)], dtype=bool)
        return cls.from_bits(p, bits)

    def to_edge_list(self):
        return "".join("%d %d\n" % (i + 1, j + 1) for i, j in self.edges())

    @classmethod
    def from_edge_list(cls, p, text):
        edges = []

        for lineno, line in enumerate(text.splitlines(), 1):
            line = line.split("#")[0].strip()

            if not line:
                continue

            parts = line.split()

            if len(parts) != 2:
                raise ValueError("line %d: expected 'i j'" % lineno)

            edges.append((int(parts[0]) - 1, int(parts[1]) - 1))

        return cls.from_edges(p, edges)

    def __eq__(self, other):
        return isinstance(other, Graph) and np.array_equal(self._adj, other._adj)

    def __hash__(self):
        return hash((self.p, self.to_bits().tobytes()))

    def __repr__(self):
        return "Graph(p=%d, edges=%s)" % (
            self.p, [(i + 1, j + 1) for i, j in self.edges()]
        )


def _check_pair(p, i, j):
    i, j = int(i), int(j)

    if i == j or not (0 <= i < p and 0 <= j < p):
        raise ValueError("invalid node pair (%d, %d) for p=%d" % (i, j, p))

    return (i, j) if i < j else (j, i)


def bits_to_hex(bits):
    m = len(bits)
    value = 0

    for k in np.flatnonzero(bits):
        value |= 1 << int(k)

    return format(value, "0%dx" % max(1, -(-m // 4)))


def pair_index(p, i, j):
    """Position of the pair (i, j), i < j, in row-major upper-triangular order."""
    return i * (2 * p - i - 1) // 2 + (j - i - 1)


def all_pairs(p):
    i, j = np.triu_indices(p, 1)
    return i.astype(np.int64), j.astype(np.int64)


def flip_edge(G, e):
    """Graph differing from ``G`` exactly at the pair ``e``."""
    i, j = _check_pair(G.p, *e)
    adj = G.adj.copy()
    adj[i, j] = adj[j, i] = not adj[i, j]
    return Graph(adj)


def common_neighbor_count(G, e):
    """Number of length-two paths between the endpoints of ``e``."""
    i, j = _check_pair(G.p, *e)
    return int(np.sum(G.adj[i] & G.adj[j]))


@dataclass(frozen=True)
class EdgeContext:
    """
    Node reordering that moves the endpoints of ``e`` to the last two
    positions. ``perm[v]`` is the new position of node ``v``.
    """

    e: tuple
    direction: str
    perm: np.ndarray = field(repr=False)

    @property
    def inverse(self):
        return np.argsort(self.perm)


def stable_shift(p, i, j):
    perm = np.empty(p, dtype=np.int64)
    rest = [v for v in range(p) if v != i and v != j]
    perm[rest] = np.arange(p - 2)
    perm[i] = p - 2
    perm[j] = p - 1
    return perm


def reorder_for_edge(G, e):
    i, j = _check_pair(G.p, *e)
    direction = "remove" if G.adj[i, j] else "add"
    return EdgeContext((i, j), direction, stable_shift(G.p, i, j))


# Priors ------------------------------------------------------------------


@dataclass(frozen=True)
class GraphPrior:
    kind: str = "uniform"
    rho: float = 0.5

    def __post_init__(self):
        if self.kind not in ("uniform", "bernoulli"):
            raise ValueError("unknown graph prior %r" % self.kind)

        if self.kind == "bernoulli" and not 0.0 < self.rho < 1.0:
            raise ValueError("edge inclusion probability must lie in (0, 1)")

    @classmethod
    def parse(cls, text):
        """``uniform`` or ``bernoulli:<rho>``."""
        text = text.strip().lower()

        if text == "uniform":
            return cls()

        if text.startswith("bernoulli:"):
            return cls("bernoulli", float(text.split(":", 1)[1]))

        raise ValueError("graph prior must be 'uniform' or 'bernoulli:<rho>'")

    @property
    def log_odds(self):
        """log p(G + e) - log p(G) for adding any single edge."""
        if self.kind == "uniform":
            return 0.0

        return math.log(self.rho) - math.log1p(-self.rho)

    def log_pmf(self, G):
        if self.kind == "uniform":
            return -G.m_max * math.log(2.0)

        m = G.n_edges
        return m * math.log(self.rho) + (G.m_max - m) * math.log1p(-self.rho)

    def __str__(self):
        return "uniform" if self.kind == "uniform" else "bernoulli:%r" % self.rho


def log_prior_ratio(prior, G, G_tilde):
    diff = G_tilde.n_edges - G.n_edges

    if abs(diff) != 1 or np.sum(G.adj != G_tilde.adj) != 2:
        raise ValueError("G_tilde must differ from G by exactly one edge")

    return diff * prior.log_odds


# Decompositions ------------------------------------------------------------


@njit
def components_kernel(adj):
    """Label each vertex with its component; labels ordered by smallest vertex."""
    p = adj.shape[0]
    label = np.full(p, -1, dtype=np.int64)
    stack = np.empty(p, dtype=np.int64)
    n_comp = 0

    for s in range(p):
        if label[s] >= 0:
            continue

        label[s] = n_comp
        top = 0
        stack[0] = s

        while top >= 0:
            v = stack[top]
            top -= 1

            for u in range(p):
                if adj[v, u] and label[u] < 0:
                    label[u] = n_comp
                    top += 1
                    stack[top] = u

        n_comp += 1

    return label, n_comp


def connected_components(G):
    label, n_comp = components_kernel(G.adj)
    return [np.flatnonzero(label == c) for c in range(n_comp)]


def maximal_cliques(G):
    """
    Bron-Kerbosch with Tomita pivoting over Python-int bitsets.

    Returns sorted tuples, themselves sorted; isolated vertices come back as
    singletons.
    """
    p = G.p
    nbr = [sum(1 << int(u) for u in G.neighbors(v)) for v in range(p)]
    out = []

    def expand(R, P, X):
        if not P and not X:
            out.append(tuple(v for v in range(p) if R >> v & 1))
            return

        PX = P | X
        pivot = max(
            (u for u in range(p) if PX >> u & 1),
            key=lambda u: bin(P & nbr[u]).count("1"),
        )
        todo = P & ~nbr[pivot]

        while todo:
            bit = todo & -todo
            v = bit.bit_length() - 1
            expand(R | bit, P & nbr[v], X & nbr[v])
            P &= ~bit
            X |= bit
            todo &= ~bit

    expand(0, (1 << p) - 1, 0)
    return sorted(out)


@njit
def _popcount(x):
    c = 0

    while x:
        x &= x - np.uint64(1)
        c += 1

    return c


@njit
def cliques_kernel(adj):
    """
    Maximal cliques as flat (ptr, vertices) arrays, p <= 64.

    Iterative Bron-Kerbosch with pivoting on uint64 bitsets.
    """
    p = adj.shape[0]
    one = np.uint64(1)
    nbr = np.zeros(p, dtype=np.uint64)

    for v in range(p):
        for u in range(p):
            if adj[v, u]:
                nbr[v] |= one << np.uint64(u)

    R = np.zeros(p + 2, dtype=np.uint64)
    P = np.zeros(p + 2, dtype=np.uint64)
    X = np.zeros(p + 2, dtype=np.uint64)
    todo = np.zeros(p + 2, dtype=np.uint64)
    full = np.uint64(0)

    for v in range(p):
        full |= one << np.uint64(v)

    ptr = [0]
    verts = []
    P[0] = full
    todo[0] = full & ~nbr[_pivot(full, np.uint64(0), nbr, p)]
    level = 0

    while level >= 0:
        if todo[level] == 0:
            level -= 1
            continue

        t = todo[level]
        v = 0

        while not (t >> np.uint64(v)) & one:
            v += 1

        bit = one << np.uint64(v)
        todo[level] &= ~bit
        Rn = R[level] | bit
        Pn = P[level] & nbr[v]
        Xn = X[level] & nbr[v]
        P[level] &= ~bit
        X[level] |= bit

        if Pn == 0:
            if Xn == 0:
                for u in range(p):
                    if (Rn >> np.uint64(u)) & one:
                        verts.append(u)

                ptr.append(len(verts))

            continue

        level += 1
        R[level] = Rn
        P[level] = Pn
        X[level] = Xn
        todo[level] = Pn & ~nbr[_pivot(Pn, Xn, nbr, p)]

    return np.array(ptr, dtype=np.int64), np.array(verts, dtype=np.int64)


@njit
def _pivot(P, X, nbr, p):
    one = np.uint64(1)
    PX = P | X
    best = -1
    best_count = -1

    for u in range(p):
        if (PX >> np.uint64(u)) & one:
            c = _popcount(P & nbr[u])

            if c > best_count:
                best_count = c
                best = u

    return best


@njit
def _mcsm(adj):
    """
    MCS-M minimal elimination ordering.

    Returns ``number`` (vertex -> elimination position), the minimal
    triangulation ``H`` and the clique generators flagged in ``gen``.
    """
    n = adj.shape[0]
    w = np.zeros(n, dtype=np.int64)
    numbered = np.zeros(n, dtype=np.bool_)
    number = np.empty(n, dtype=np.int64)
    gen = np.zeros(n, dtype=np.bool_)
    H = adj.copy()
    reach = np.empty(n, dtype=np.int64)
    done = np.empty(n, dtype=np.bool_)
    inf = n + 10
    prev = -1

    for k in range(n - 1, -1, -1):
        v = -1

        for u in range(n):
            if not numbered[u] and (v < 0 or w[u] > w[v]):
                v = u

        if k < n - 1 and w[v] <= prev:
            gen[v] = True

        prev = w[v]
        numbered[v] = True
        number[v] = k

        # reach[u]: smallest achievable max weight over internal vertices of
        # an unnumbered path v ~> u (-1 for direct neighbours).
        for u in range(n):
            reach[u] = inf
            done[u] = numbered[u]

        for u in range(n):
            if not numbered[u] and adj[v, u]:
                reach[u] = -1

        while True:
            x = -1

            for u in range(n):
                if not done[u] and reach[u] < inf and (x < 0 or reach[u] < reach[x]):
                    x = u

            if x < 0:
                break

            done[x] = True
            via = max(reach[x], w[x])

            for y in range(n):
                if not done[y] and adj[x, y] and via < reach[y]:
                    reach[y] = via

        for u in range(n):
            if not numbered[u] and reach[u] < w[u]:
                reach[u] = -2  # marks an update; weights read before increment

        for u in range(n):
            if not numbered[u] and reach[u] == -2:
                w[u] += 1
                H[v, u] = True
                H[u, v] = True

    return number, H, gen


@njit
def atoms_kernel(adj):
    """
    Clique minimal separator decomposition of a connected graph.

    Atoms come back in a perfect order as flat (ptr, vertices) arrays, with a
    parallel (ptr, vertices) pair of separators; the first separator is empty.
    """
    n = adj.shape[0]
    number, H, gen = _mcsm(adj)
    order = np.empty(n, dtype=np.int64)

    for v in range(n):
        order[number[v]] = v

    removed = np.zeros(n, dtype=np.bool_)
    in_sep = np.zeros(n, dtype=np.bool_)
    seen = np.zeros(n, dtype=np.bool_)
    stack = np.empty(n, dtype=np.int64)
    S = np.empty(n, dtype=np.int64)

    # Extracted atoms/separators in extraction order, stored as membership rows.
    ex_atom = np.zeros((n, n), dtype=np.bool_)
    ex_sep = np.zeros((n, n), dtype=np.bool_)
    n_ex = 0

    for k in range(n):
        x = order[k]

        if not gen[x] or removed[x]:
            continue

        ns = 0

        for u in range(n):
            if H[x, u] and number[u] > number[x]:
                S[ns] = u
                ns += 1

        if ns == 0:
            continue

        ok = True

        for a in range(ns):
            if removed[S[a]]:
                ok = False
                break

            for b in range(a + 1, ns):
                if not adj[S[a], S[b]]:
                    ok = False
                    break

            if not ok:
                break

        if not ok:
            continue

        for u in range(n):
            in_sep[u] = False
            seen[u] = False

        for a in range(ns):
            in_sep[S[a]] = True

        seen[x] = True
        top = 0
        stack[0] = x

        while top >= 0:
            v = stack[top]
            top -= 1

            for u in range(n):
                if adj[v, u] and not removed[u] and not in_sep[u] and not seen[u]:
                    seen[u] = True
                    top += 1
                    stack[top] = u

        remaining = False

        for u in range(n):
            if not removed[u] and not seen[u] and not in_sep[u]:
                remaining = True
                break

        if not remaining:
            continue  # S does not separate what is left

        for u in range(n):
            ex_atom[n_ex, u] = seen[u] or in_sep[u]
            ex_sep[n_ex, u] = in_sep[u]

            if seen[u]:
                removed[u] = True

        n_ex += 1

    n_atoms = n_ex + 1
    a_ptr = np.zeros(n_atoms + 1, dtype=np.int64)
    s_ptr = np.zeros(n_atoms + 1, dtype=np.int64)
    a_len = 0
    s_len = 0

    for u in range(n):
        if not removed[u]:
            a_len += 1

    for t in range(n_ex):
        for u in range(n):
            if ex_atom[t, u]:
                a_len += 1

            if ex_sep[t, u]:
                s_len += 1

    a_verts = np.empty(a_len, dtype=np.int64)
    s_verts = np.empty(s_len, dtype=np.int64)
    pos_a = 0
    pos_s = 0

    for u in range(n):
        if not removed[u]:
            a_verts[pos_a] = u
            pos_a += 1

    a_ptr[1] = pos_a

    # Reverse extraction order is perfect: each separator lies in atoms placed earlier.
    for r in range(1, n_atoms):
        t = n_ex - r

        for u in range(n):
            if ex_atom[t, u]:
                a_verts[pos_a] = u
                pos_a += 1

            if ex_sep[t, u]:
                s_verts[pos_s] = u
                pos_s += 1

        a_ptr[r + 1] = pos_a
        s_ptr[r + 1] = pos_s

    return a_ptr, a_verts, s_ptr, s_verts


@njit
def is_clique(adj, verts):
    for a in range(len(verts)):
        for b in range(a + 1, len(verts)):
            if not adj[verts[a], verts[b]]:
                return False

    return True


@dataclass
class AtomDecomposition:
    """
    Per connected component: atoms in a perfect order, the separator of each
    atom (empty for the first), and whether each atom is complete.
    """

    components: list
    atoms: list
    separators: list
    complete: list

    def all_atoms(self):
        return [a for comp in self.atoms for a in comp]

    def is_decomposable(self):
        return all(all(c) for c in self.complete)

    def largest_atom_size(self):
        return max(len(a) for a in self.all_atoms())


def atom_decomposition(G):
    components, atoms, separators, complete = [], [], [], []

    for comp in connected_components(G):
        components.append(comp)
        sub = np.ascontiguousarray(G.adj[np.ix_(comp, comp)])
        a_ptr, a_verts, s_ptr, s_verts = atoms_kernel(sub)
        comp_atoms, comp_seps, comp_complete = [], [], []

        for t in range(len(a_ptr) - 1):
            local = a_verts[a_ptr[t]:a_ptr[t + 1]]
            comp_atoms.append(comp[local])
            comp_seps.append(comp[s_verts[s_ptr[t]:s_ptr[t + 1]]])
            comp_complete.append(bool(is_clique(sub, local)))

        atoms.append(comp_atoms)
        separators.append(comp_seps)
        complete.append(comp_complete)

    return AtomDecomposition(components, atoms, separators, complete)
