"""
Chain traces: one row per iteration with the graph as packed upper-triangular
bits, |E|, wall-clock nanoseconds and cumulative move counters.

The CSV form keeps the recorded (post burn-in) rows only:

    iter,edges_hex,n_edges,nanos,promotions,accepts

``iter`` is the 1-based iteration number counted from the start of the chain,
burn-in included.
"""

import csv
import io
import os
import tempfile
from dataclasses import dataclass

import numpy as np

from .graph import Graph

HEADER = ["iter", "edges_hex", "n_edges", "nanos", "promotions", "accepts"]
COUNTER_NAMES = ("promotions", "accepts", "first_stage_rejections", "prior_draws", "gwishart_draws")


def n_words(m):
    return max(1, -(-m // 64))


def words_to_int(row):
    value = 0

    for w, word in enumerate(row):
        value |= int(word) << (64 * w)

    return value


def p_from_hex_width(width):
    """Smallest p >= 3 whose pair count needs ``width`` hex digits."""
    p = 3

    while -(-(p * (p - 1) // 2) // 4) < width:
        p += 1

    if -(-(p * (p - 1) // 2) // 4) != width:
        raise ValueError("no node count matches a %d-digit graph encoding" % width)

    return p


@dataclass
class TraceRecord:
    iteration: int
    graph: Graph
    n_edges: int
    nanos: int
    promotions: int
    accepts: int
    first_stage_rejections: int
    prior_draws: int


class Trace:
    """
    Full per-iteration chain output. ``words`` has one row of packed edge bits
    per iteration (bit k of the row is pair k in row-major upper-triangular
    order); ``counters`` holds the cumulative counters named in
    ``COUNTER_NAMES``.
    """

    def __init__(self, p, words, n_edges, nanos, counters, burn_in=0, iterations=None, k_hat=None):
        self.p = int(p)
        self.words = np.asarray(words, dtype=np.uint64)
        self.n_edges = np.asarray(n_edges, dtype=np.int64)
        self.nanos = np.asarray(nanos, dtype=np.int64)
        self.counters = np.asarray(counters, dtype=np.int64)
        self.burn_in = int(burn_in)
        n = len(self.n_edges)
        self.iterations = (
            np.arange(1, n + 1, dtype=np.int64) if iterations is None else np.asarray(iterations, dtype=np.int64)
        )
        self.k_hat = k_hat

    def __len__(self):
        return len(self.n_edges)

    @property
    def m_max(self):
        return self.p * (self.p - 1) // 2

    def counter(self, name):
        return self.counters[:, COUNTER_NAMES.index(name)]

    def record(self, t):
        c = self.counters[t]
        return TraceRecord(
            int(self.iterations[t]), self.graph(t), int(self.n_edges[t]), int(self.nanos[t]),
            int(c[0]), int(c[1]), int(c[2]), int(c[3]),
        )

    def graph(self, t):
        return Graph.from_hex(self.p, format(words_to_int(self.words[t]), "x"))

    def recorded(self):
        """Rows after burn-in."""
        mask = self.iterations > self.burn_in
        return Trace(
            self.p, self.words[mask], self.n_edges[mask], self.nanos[mask],
            self.counters[mask], self.burn_in, self.iterations[mask], self.k_hat,
        )

    def edge_matrix(self):
        """Boolean (n_iter, m_max) matrix of edge indicators."""
        as_bytes = self.words.astype("<u8").view(np.uint8).reshape(len(self), -1)
        bits = np.unpackbits(as_bytes, axis=1, bitorder="little")
        return bits[:, : self.m_max].astype(bool)

    def hex_rows(self):
        width = max(1, -(-self.m_max // 4))
        return [format(words_to_int(row), "0%dx" % width) for row in self.words]

    def to_csv(self, path):
        """Write the recorded rows atomically."""
        rec = self.recorded()
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(HEADER)
        prom = rec.counter("promotions")
        acc = rec.counter("accepts")

        for t, hx in enumerate(rec.hex_rows()):
            w.writerow([rec.iterations[t], hx, rec.n_edges[t], rec.nanos[t], prom[t], acc[t]])

        atomic_write(path, buf.getvalue())

    @classmethod
    def from_csv(cls, path, p=None):
        with open(path, newline="") as fh:
            rows = list(csv.reader(fh))

        if not rows or [h.strip() for h in rows[0]] != HEADER:
            raise ValueError("%s: expected header %s" % (path, ",".join(HEADER)))

        rows = rows[1:]

        if not rows:
            raise ValueError("%s: trace has no rows" % path)

        if p is None:
            p = p_from_hex_width(len(rows[0][1]))

        m = p * (p - 1) // 2
        nw = n_words(m)
        words = np.zeros((len(rows), nw), dtype=np.uint64)
        its, ne, nanos, counters = [], [], [], np.zeros((len(rows), len(COUNTER_NAMES)), dtype=np.int64)
        mask = (1 << 64) - 1

        for t, row in enumerate(rows):
            if len(row) != len(HEADER):
                raise ValueError("%s: row %d has %d fields" % (path, t + 2, len(row)))

            value = int(row[1], 16)

            for w in range(nw):
                words[t, w] = (value >> (64 * w)) & mask

            its.append(int(row[0]))
            ne.append(int(row[2]))
            nanos.append(int(row[3]))
            counters[t, 0] = int(row[4])
            counters[t, 1] = int(row[5])

        its = np.array(its, dtype=np.int64)
        return cls(p, words, ne, nanos, counters, burn_in=int(its[0]) - 1, iterations=its)


def atomic_write(path, text):
    """Write ``text`` to ``path`` through a temporary file and a rename."""
    path = os.fspath(path)
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-", suffix=os.path.basename(path))

    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)

        os.chmod(tmp, 0o644)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
