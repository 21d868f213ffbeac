"""Simple undirected graphs, SNAP-style edge-list I/O and random generators.

Graphs are stored in CSR form (``indptr``/``indices``) with sorted neighbor
rows. They are treated as immutable once built, so a single instance can be
shared by many simulation trials.
"""

from __future__ import annotations

import io
import logging
import os
from collections import defaultdict
from dataclasses import dataclass
from typing import BinaryIO, Iterable, Mapping

import numpy as np

logger = logging.getLogger(__name__)

MAX_RESTARTS = 1000


class GraphError(ValueError):
    """Raised for infeasible generator input or an exhausted retry budget."""


class EdgeListError(ValueError):
    """Malformed edge-list input."""

    def __init__(self, message: str, lineno: int | None = None):
        if lineno is not None:
            message = f"line {lineno}: {message}"
        super().__init__(message)
        self.lineno = lineno


class Graph:
    """Simple undirected graph on players ``0..n-1``.

    Use :meth:`from_edges` to build one; the constructor trusts its CSR input.
    """

    __slots__ = ("n", "indptr", "indices", "degrees", "_adj")

    def __init__(self, n: int, indptr: np.ndarray, indices: np.ndarray):
        self.n = int(n)
        self.indptr = indptr
        self.indices = indices
        self.degrees = np.diff(indptr)
        self._adj = None
        for arr in (self.indptr, self.indices, self.degrees):
            arr.setflags(write=False)

    @classmethod
    def from_edges(cls, n: int, edges: Iterable[tuple[int, int]]) -> "Graph":
        """Build a graph from undirected edges, rejecting loops and duplicates."""
        e = np.asarray(list(edges) if not isinstance(edges, np.ndarray) else edges,
                       dtype=np.int64).reshape(-1, 2)
        if n < 0:
            raise GraphError("n must be nonnegative")
        if e.size and (e.min() < 0 or e.max() >= n):
            raise GraphError("edge endpoint out of range")
        if np.any(e[:, 0] == e[:, 1]):
            raise GraphError("self-loops are not allowed")
        lo = np.minimum(e[:, 0], e[:, 1])
        hi = np.maximum(e[:, 0], e[:, 1])
        keys = lo * max(n, 1) + hi
        if np.unique(keys).size != keys.size:
            raise GraphError("parallel edges are not allowed")
        src = np.concatenate([lo, hi])
        dst = np.concatenate([hi, lo])
        order = np.lexsort((dst, src))
        src, dst = src[order], dst[order]
        indptr = np.zeros(n + 1, dtype=np.int64)
        np.add.at(indptr, src + 1, 1)
        np.cumsum(indptr, out=indptr)
        return cls(n, indptr, dst.astype(np.int64))

    @property
    def n_edges(self) -> int:
        return int(self.indices.size // 2)

    def degree(self, i: int) -> int:
        return int(self.degrees[i])

    def neighbors(self, i: int) -> np.ndarray:
        return self.indices[self.indptr[i]:self.indptr[i + 1]]

    @property
    def adjacency(self) -> list[list[int]]:
        """Per-player sorted neighbor lists (cached; do not mutate)."""
        if self._adj is None:
            ind = self.indices.tolist()
            ptr = self.indptr.tolist()
            self._adj = [ind[ptr[i]:ptr[i + 1]] for i in range(self.n)]
        return self._adj

    def edges(self) -> np.ndarray:
        """Edges as an ``(m, 2)`` array with ``u < v``, lexicographically sorted."""
        src = np.repeat(np.arange(self.n, dtype=np.int64), self.degrees)
        mask = src < self.indices
        return np.column_stack([src[mask], self.indices[mask]])

    def degree_sequence(self) -> "DegreeSequence":
        ks, counts = np.unique(self.degrees, return_counts=True)
        return DegreeSequence({int(k): int(c) for k, c in zip(ks, counts)})

    def canonical_bytes(self) -> bytes:
        """Byte serialization of the edge set, identical for identical graphs."""
        return np.int64(self.n).tobytes() + self.edges().astype("<i8").tobytes()

    def neighbor_sum(self, values: np.ndarray) -> np.ndarray:
        """For each player, the sum of ``values`` over its neighbors."""
        values = np.asarray(values, dtype=np.int64)
        if self.n == 0:
            return np.zeros(0, dtype=np.int64)
        # trailing pad keeps every start index valid; empty rows are masked
        padded = np.append(values[self.indices], 0)
        sums = np.add.reduceat(padded, self.indptr[:-1])
        return np.where(self.degrees > 0, sums, 0)

    def __eq__(self, other):
        if not isinstance(other, Graph):
            return NotImplemented
        return self.canonical_bytes() == other.canonical_bytes()

    def __hash__(self):
        return hash(self.canonical_bytes())

    def __repr__(self):
        return f"Graph(n={self.n}, m={self.n_edges})"


@dataclass(frozen=True)
class DegreeSequence:
    """Degree histogram ``{k: n_k}``."""

    counts: Mapping[int, int]

    def __post_init__(self):
        clean = {}
        for k, c in self.counts.items():
            k, c = int(k), int(c)
            if k < 0 or c < 0:
                raise GraphError(f"invalid degree count {k}: {c}")
            if c:
                clean[k] = c
        object.__setattr__(self, "counts", dict(sorted(clean.items())))

    @property
    def n(self) -> int:
        return sum(self.counts.values())

    @property
    def K(self) -> int:
        return max(self.counts, default=0)

    @property
    def degree_sum(self) -> int:
        return sum(k * c for k, c in self.counts.items())

    @property
    def mean_degree(self) -> float:
        return self.degree_sum / self.n if self.n else 0.0

    def as_list(self) -> list[int]:
        """Non-increasing list of per-vertex degrees."""
        return [k for k in sorted(self.counts, reverse=True) for _ in range(self.counts[k])]

    def is_graphical(self) -> bool:
        """Erdős–Gallai test."""
        d = self.as_list()
        n = len(d)
        if sum(d) % 2:
            return False
        if any(k >= n for k in d) and n > 0:
            return False
        prefix = 0
        for r in range(1, n + 1):
            prefix += d[r - 1]
            tail = sum(min(x, r) for x in d[r:])
            if prefix > r * (r - 1) + tail:
                return False
        return True


@dataclass
class EdgeListReport:
    graph: Graph
    duplicates: int
    self_loops: int
    vertex_ids: list[int]


def read_edge_list(source) -> EdgeListReport:
    """Parse a whitespace-delimited edge list and report dropped lines.

    ``source`` is a path or a binary stream. Vertex ids are compacted to
    ``0..n-1`` in first-seen order.
    """
    if isinstance(source, (str, os.PathLike)):
        with open(source, "rb") as fh:
            return _parse(fh)
    return _parse(source)


def _parse(stream: BinaryIO) -> EdgeListReport:
    wrapped = not isinstance(stream, io.TextIOBase)
    text = io.TextIOWrapper(stream, encoding="utf-8") if wrapped else stream
    try:
        return _parse_lines(text)
    finally:
        if wrapped:
            text.detach()


def _parse_lines(text) -> EdgeListReport:
    ids: dict[int, int] = {}
    seen: set[tuple[int, int]] = set()
    edges: list[tuple[int, int]] = []
    dups = loops = 0
    for lineno, line in enumerate(text, start=1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        tokens = line.split()
        if len(tokens) != 2:
            raise EdgeListError(f"expected 2 vertex ids, got {len(tokens)} tokens", lineno)
        try:
            u_raw, v_raw = (int(t) for t in tokens)
        except ValueError:
            raise EdgeListError(f"non-integer vertex id in {line!r}", lineno) from None
        if u_raw < 0 or v_raw < 0:
            raise EdgeListError("negative vertex id", lineno)
        u = ids.setdefault(u_raw, len(ids))
        v = ids.setdefault(v_raw, len(ids))
        if u == v:
            loops += 1
            continue
        key = (u, v) if u < v else (v, u)
        if key in seen:
            dups += 1
            continue
        seen.add(key)
        edges.append(key)
    if not ids:
        raise EdgeListError("empty edge list")
    if dups or loops:
        logger.warning("edge list: dropped %d duplicate edge(s) and %d self-loop(s)", dups, loops)
    return EdgeListReport(Graph.from_edges(len(ids), edges), dups, loops, list(ids))


def load_edge_list(source) -> Graph:
    return read_edge_list(source).graph


def write_edge_list(g: Graph, stream) -> None:
    """Write ``g`` as ``u v`` lines; accepts a path or a text/binary stream."""
    lines = "".join(f"{u} {v}\n" for u, v in g.edges().tolist())
    if isinstance(stream, (str, os.PathLike)):
        with open(stream, "w", encoding="utf-8") as fh:
            fh.write(lines)
    elif isinstance(stream, io.TextIOBase):
        stream.write(lines)
    else:
        stream.write(lines.encode("utf-8"))


def _as_rng(rng) -> np.random.Generator:
    if isinstance(rng, np.random.Generator):
        return rng
    return np.random.default_rng(rng)


def _suitable(edges: set, pending: Mapping[int, int]) -> bool:
    # is there any pair of distinct pending vertices not yet joined?
    nodes = list(pending)
    for i, u in enumerate(nodes):
        for v in nodes[:i]:
            key = (u, v) if u < v else (v, u)
            if key not in edges:
                return True
    return False


def _try_pairing(stubs: np.ndarray, rng: np.random.Generator) -> set | None:
    edges: set[tuple[int, int]] = set()
    while stubs.size:
        stubs = rng.permutation(stubs)
        pending: dict[int, int] = defaultdict(int)
        for u, v in stubs.reshape(-1, 2).tolist():
            key = (u, v) if u < v else (v, u)
            if u != v and key not in edges:
                edges.add(key)
            else:
                pending[u] += 1
                pending[v] += 1
        if pending and not _suitable(edges, pending):
            return None
        stubs = np.array([u for u, c in sorted(pending.items()) for _ in range(c)], dtype=np.int64)
    return edges


def _pairing_graph(degrees: np.ndarray, rng: np.random.Generator) -> Graph:
    stubs = np.repeat(np.arange(degrees.size, dtype=np.int64), degrees)
    for _ in range(MAX_RESTARTS):
        edges = _try_pairing(stubs, rng)
        if edges is not None:
            return Graph.from_edges(degrees.size, sorted(edges))
    raise GraphError(f"stub matching failed after {MAX_RESTARTS} restarts")


def gen_random_regular(n: int, k: int, rng=None) -> Graph:
    """Random ``k``-regular simple graph on ``n`` vertices (pairing model)."""
    if n < 0 or k < 0:
        raise GraphError("n and k must be nonnegative")
    if (n * k) % 2:
        raise GraphError(f"n*k must be even (n={n}, k={k})")
    if k >= n and not (n == 0 and k == 0):
        raise GraphError(f"need k < n (n={n}, k={k})")
    return _pairing_graph(np.full(n, k, dtype=np.int64), _as_rng(rng))


def gen_configuration(seq: DegreeSequence | Mapping[int, int], rng=None) -> Graph:
    """Random simple graph realizing a degree sequence exactly.

    Vertices are numbered by ascending degree: the first ``n_{k_min}``
    vertices have the smallest degree, and so on.
    """
    if not isinstance(seq, DegreeSequence):
        seq = DegreeSequence(seq)
    if not seq.is_graphical():
        raise GraphError(f"degree sequence {dict(seq.counts)} is not graphical")
    degrees = np.array([k for k, c in seq.counts.items() for _ in range(c)], dtype=np.int64)
    return _pairing_graph(degrees, _as_rng(rng))


def lognormal_degree_sequence(n: int, mean_degree: float, sigma: float = 1.0,
                              max_degree: int | None = None, rng=None) -> DegreeSequence:
    """Heavy-tailed degree histogram with the given mean (before capping).

    Degrees are rounded lognormal draws clipped to ``[1, max_degree]``; one
    degree is bumped if needed to make the sum even.
    """
    if n < 2:
        raise GraphError("need n >= 2")
    if not 1 <= mean_degree < n:
        raise GraphError("mean_degree must lie in [1, n)")
    rng = _as_rng(rng)
    cap = n - 1 if max_degree is None else min(int(max_degree), n - 1)
    mu = np.log(mean_degree) - sigma ** 2 / 2
    d = np.clip(np.rint(rng.lognormal(mu, sigma, size=n)), 1, cap).astype(np.int64)
    if d.sum() % 2:
        i = int(np.argmin(d))
        d[i] += 1
    ks, counts = np.unique(d, return_counts=True)
    return DegreeSequence({int(k): int(c) for k, c in zip(ks, counts)})
