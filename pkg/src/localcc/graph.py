"""Signed complete graphs, probe oracles and instance generators.

A :class:`SignedGraph` stores the positive relation of a complete graph as a
dense symmetric boolean matrix; every pair that is not positive is negative.
Algorithms never touch the matrix directly, they go through an
:class:`EdgeOracle` which charges one unit per probed pair.
"""

from __future__ import annotations

import io
import math
import threading
from dataclasses import dataclass, field
from typing import Callable, Iterable

import numpy as np

from .seeding import SeedContext, as_seed

__all__ = [
    "GraphFormatError",
    "QueryBudgetExceeded",
    "SignedGraph",
    "WeightedGraph",
    "EdgeOracle",
    "NeighborhoodOracle",
    "parse_graph",
    "format_graph",
    "parse_clustering",
    "format_clustering",
    "round_weighted",
    "graph_distance",
    "cluster_graph",
    "random_graph",
    "generate_planted",
    "planted_oracle",
    "generate_adversarial",
]


class GraphFormatError(ValueError):
    pass


class QueryBudgetExceeded(RuntimeError):
    pass


class SignedGraph:
    """Complete graph whose pairs are labelled positive or negative.

    Parameters
    ----------
    adjacency : (n, n) array_like of bool
        Positive relation.  Must be symmetric; the diagonal is ignored and
        stored as ``False``.
    """

    def __init__(self, adjacency):
        adj = np.array(adjacency, dtype=bool, copy=True)
        if adj.ndim != 2 or adj.shape[0] != adj.shape[1]:
            raise ValueError("adjacency must be square")
        if not np.array_equal(adj, adj.T):
            raise ValueError("adjacency must be symmetric")
        np.fill_diagonal(adj, False)
        adj.setflags(write=False)
        self._adj = adj

    @classmethod
    def from_edges(cls, n: int, edges: Iterable[tuple[int, int]]) -> "SignedGraph":
        adj = np.zeros((n, n), dtype=bool)
        for u, v in edges:
            if not (0 <= u < n and 0 <= v < n):
                raise ValueError(f"vertex out of range in edge ({u}, {v})")
            adj[u, v] = adj[v, u] = True
        return cls(adj)

    @classmethod
    def empty(cls, n: int) -> "SignedGraph":
        return cls(np.zeros((n, n), dtype=bool))

    @property
    def n(self) -> int:
        return self._adj.shape[0]

    @property
    def adjacency(self) -> np.ndarray:
        """Read-only view of the positive relation."""
        return self._adj

    def is_positive(self, u: int, v: int) -> bool:
        return bool(self._adj[u, v])

    def positive_edges(self) -> list[tuple[int, int]]:
        us, vs = np.nonzero(np.triu(self._adj, 1))
        return list(zip(us.tolist(), vs.tolist()))

    def num_positive(self) -> int:
        return int(np.triu(self._adj, 1).sum())

    def neighbors(self, v: int) -> np.ndarray:
        return np.flatnonzero(self._adj[v])

    def oracle(self, budget: int | None = None, record: bool = False) -> "EdgeOracle":
        return EdgeOracle(self, budget=budget, record=record)

    def __eq__(self, other):
        return isinstance(other, SignedGraph) and np.array_equal(self._adj, other._adj)

    def __hash__(self):
        return hash(self._adj.tobytes())

    def __repr__(self):
        return f"SignedGraph(n={self.n}, positive={self.num_positive()})"


@dataclass(frozen=True)
class WeightedGraph:
    """Similarity in ``[0, 1]`` for every unordered pair (zero when unlisted)."""

    weights: np.ndarray

    def __post_init__(self):
        w = np.array(self.weights, dtype=float)
        if w.ndim != 2 or w.shape[0] != w.shape[1]:
            raise ValueError("weights must be square")
        if not np.allclose(w, w.T):
            raise ValueError("weights must be symmetric")
        if ((w < 0) | (w > 1)).any():
            raise ValueError("weights must lie in [0, 1]")
        np.fill_diagonal(w, 0.0)
        w.setflags(write=False)
        object.__setattr__(self, "weights", w)

    @property
    def n(self) -> int:
        return self.weights.shape[0]


def round_weighted(g: WeightedGraph) -> SignedGraph:
    """Round each similarity to the closer of 0 and 1; exactly 1/2 goes to 1."""
    return SignedGraph(g.weights >= 0.5)


def graph_distance(g1: SignedGraph, g2: SignedGraph, fractional: bool = False):
    """Number of unordered pairs whose sign differs (divided by n**2 if asked)."""
    if g1.n != g2.n:
        raise ValueError(f"graphs have different sizes: {g1.n} != {g2.n}")
    diff = int(np.triu(g1.adjacency ^ g2.adjacency, 1).sum())
    return diff / g1.n**2 if fractional else diff


class EdgeOracle:
    """Counting access to the sign of a pair.

    ``query_count`` goes up by one for every pair answered, including repeats
    and self-pairs (which are always negative).  The oracle never caches.

    The backing store is either a :class:`SignedGraph` or a vectorised
    function ``fn(us, vs) -> bool array`` over vertex index arrays, which lets
    generators answer probes without materialising ``n**2`` entries.
    """

    def __init__(self, source, n: int | None = None, budget: int | None = None,
                 record: bool = False):
        if isinstance(source, SignedGraph):
            self.graph = source
            self._fn = None
            self.n = source.n
        else:
            if n is None:
                raise ValueError("function-backed oracles need an explicit n")
            self.graph = None
            self._fn = source
            self.n = int(n)
        self.budget = budget
        self.query_count = 0
        self.transcript: list[tuple[np.ndarray, np.ndarray]] | None = [] if record else None
        self._lock = threading.Lock()

    def _charge(self, k: int):
        with self._lock:
            if self.budget is not None and self.query_count + k > self.budget:
                raise QueryBudgetExceeded(
                    f"query budget {self.budget} exhausted ({self.query_count} used, {k} requested)")
            self.query_count += k

    def query(self, u: int, v: int) -> bool:
        return bool(self.query_many(np.array([u]), np.array([v]))[0])

    __call__ = query

    def query_many(self, us, vs) -> np.ndarray:
        us = np.asarray(us, dtype=np.int64)
        vs = np.asarray(vs, dtype=np.int64)
        us, vs = np.broadcast_arrays(us, vs)
        self._charge(us.size)
        if self.transcript is not None:
            self.transcript.append((us.copy(), vs.copy()))
        if self._fn is None:
            out = self.graph.adjacency[us, vs]
        else:
            out = np.asarray(self._fn(us, vs), dtype=bool) & (us != vs)
        return out

    def first_positive(self, u: int, vs) -> int:
        """Index of the first ``w`` in ``vs`` with ``(u, w)`` positive, or -1.

        Probes ``vs`` in order and stops at the first positive answer; only
        the probed prefix is charged and recorded.
        """
        vs = np.asarray(vs, dtype=np.int64)
        if vs.size == 0:
            return -1
        us = np.full(vs.size, u, dtype=np.int64)
        if self._fn is None:
            ans = self.graph.adjacency[u, vs]
        else:
            ans = np.asarray(self._fn(us, vs), dtype=bool) & (us != vs)
        hit = np.flatnonzero(ans)
        k = int(hit[0]) + 1 if hit.size else vs.size
        self._charge(k)
        if self.transcript is not None:
            self.transcript.append((us[:k].copy(), vs[:k].copy()))
        return k - 1 if hit.size else -1

    def reset(self):
        with self._lock:
            self.query_count = 0
            if self.transcript is not None:
                self.transcript.clear()

    def probed_pairs(self) -> list[tuple[int, int]]:
        """Flattened transcript as ordered ``(u, v)`` tuples (requires ``record``)."""
        if self.transcript is None:
            raise RuntimeError("oracle was created without record=True")
        pairs = []
        for us, vs in self.transcript:
            pairs.extend(zip(us.ravel().tolist(), vs.ravel().tolist()))
        return pairs


class NeighborhoodOracle:
    """Positive-neighbour lists, charged one step per list entry plus one per call."""

    def __init__(self, graph: SignedGraph):
        self.graph = graph
        self.n = graph.n
        self._lists = [graph.neighbors(v).tolist() for v in range(graph.n)]
        self.steps = 0

    def neighbors(self, v: int, start: int = 0, limit: int | None = None) -> list[int]:
        """Positive neighbours of v, optionally a window ``[start, start+limit)``."""
        lst = self._lists[v]
        stop = len(lst) if limit is None else min(len(lst), start + limit)
        out = lst[start:stop]
        self.steps += 1 + len(out)
        return list(out)

    def edge_oracle(self, budget: int | None = None) -> EdgeOracle:
        return EdgeOracle(self.graph, budget=budget)


# -- text formats -----------------------------------------------------------

def _lines(text):
    if isinstance(text, bytes):
        text = text.decode("utf-8")
    if not isinstance(text, str):
        text = text.read()
        if isinstance(text, bytes):
            text = text.decode("utf-8")
    for lineno, raw in enumerate(io.StringIO(text), 1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        yield lineno, line.split()


def _read_header(lines) -> int:
    try:
        lineno, fields = next(lines)
    except StopIteration:
        raise GraphFormatError("missing header line 'n <N>'") from None
    if len(fields) != 2 or fields[0] != "n":
        raise GraphFormatError(f"line {lineno}: malformed header {' '.join(fields)!r}")
    try:
        n = int(fields[1])
    except ValueError:
        raise GraphFormatError(f"line {lineno}: vertex count is not an integer") from None
    if n < 0:
        raise GraphFormatError(f"line {lineno}: negative vertex count")
    return n


def _pair(lineno, fields, n):
    try:
        u, v = int(fields[0]), int(fields[1])
    except ValueError:
        raise GraphFormatError(f"line {lineno}: vertex ids must be integers") from None
    if not (0 <= u < n and 0 <= v < n):
        raise GraphFormatError(f"line {lineno}: vertex index out of range for n={n}")
    if u == v:
        raise GraphFormatError(f"line {lineno}: self-pair ({u}, {v})")
    return (u, v) if u < v else (v, u)


def parse_graph(text, weighted: bool | None = None):
    """Parse the edge-list format into a SignedGraph or WeightedGraph.

    Header ``n <N>``, then ``u v`` (positive pair) or ``u v w`` lines.  With
    ``weighted=None`` the mode is inferred from the first edge line.
    """
    lines = _lines(text)
    n = _read_header(lines)
    rows = list(lines)
    if weighted is None:
        weighted = bool(rows) and len(rows[0][1]) == 3
    if not weighted:
        adj = np.zeros((n, n), dtype=bool)
        for lineno, fields in rows:
            if len(fields) != 2:
                raise GraphFormatError(f"line {lineno}: expected 'u v'")
            u, v = _pair(lineno, fields, n)
            adj[u, v] = adj[v, u] = True
        return SignedGraph(adj)
    w = np.zeros((n, n))
    seen: dict[tuple[int, int], float] = {}
    for lineno, fields in rows:
        if len(fields) != 3:
            raise GraphFormatError(f"line {lineno}: expected 'u v w'")
        u, v = _pair(lineno, fields, n)
        try:
            x = float(fields[2])
        except ValueError:
            raise GraphFormatError(f"line {lineno}: weight is not a number") from None
        if not 0.0 <= x <= 1.0:
            raise GraphFormatError(f"line {lineno}: weight {x} outside [0, 1]")
        if (u, v) in seen and seen[(u, v)] != x:
            raise GraphFormatError(f"line {lineno}: conflicting weight for pair ({u}, {v})")
        seen[(u, v)] = x
        w[u, v] = w[v, u] = x
    return WeightedGraph(w)


def format_graph(g) -> str:
    out = [f"n {g.n}"]
    if isinstance(g, WeightedGraph):
        us, vs = np.nonzero(np.triu(g.weights, 1))
        out += [f"{u} {v} {float(g.weights[u, v])!r}" for u, v in zip(us.tolist(), vs.tolist())]
    else:
        out += [f"{u} {v}" for u, v in g.positive_edges()]
    return "\n".join(out) + "\n"


def parse_clustering(text, n: int | None = None) -> np.ndarray:
    entries = {}
    for lineno, fields in _lines(text):
        if len(fields) != 2:
            raise GraphFormatError(f"line {lineno}: expected 'v label'")
        v, lab = int(fields[0]), int(fields[1])
        if v < 0 or lab < 0:
            raise GraphFormatError(f"line {lineno}: negative id")
        entries[v] = lab
    size = n if n is not None else (max(entries) + 1 if entries else 0)
    if sorted(entries) != list(range(size)):
        raise GraphFormatError("clustering must list every vertex exactly once")
    return np.array([entries[v] for v in range(size)], dtype=np.int64)


def format_clustering(labels) -> str:
    return "".join(f"{v} {int(lab)}\n" for v, lab in enumerate(labels))


# -- generators -------------------------------------------------------------

def cluster_graph(labels) -> SignedGraph:
    """The graph whose positive pairs are exactly the co-clustered ones."""
    labels = np.asarray(labels)
    return SignedGraph(labels[:, None] == labels[None, :])


def random_graph(n: int, p: float, seed) -> SignedGraph:
    """Uniform G(n, p) on the positive relation."""
    rng = as_seed(seed).rng("uniform")
    iu = np.triu_indices(n, 1)
    adj = np.zeros((n, n), dtype=bool)
    adj[iu] = rng.random(len(iu[0])) < p
    return SignedGraph(adj | adj.T)


_M64 = np.uint64(0xFFFFFFFFFFFFFFFF)


def _pair_uniform(key: int, us, vs) -> np.ndarray:
    """Deterministic U[0,1) per unordered pair (splitmix64 finaliser)."""
    lo = np.minimum(us, vs).astype(np.uint64)
    hi = np.maximum(us, vs).astype(np.uint64)
    with np.errstate(over="ignore"):
        x = np.uint64(key) + lo * np.uint64(0x9E3779B97F4A7C15) + hi * np.uint64(0xC2B2AE3D27D4EB4F)
        x = (x ^ (x >> np.uint64(30))) * np.uint64(0xBF58476D1CE4E5B9)
        x = (x ^ (x >> np.uint64(27))) * np.uint64(0x94D049BB133111EB)
        x = x ^ (x >> np.uint64(31))
    return (x >> np.uint64(11)).astype(np.float64) * 2.0**-53


def _planted_labels(n: int, k: int) -> np.ndarray:
    sizes = [len(b) for b in np.array_split(np.arange(n), k)]
    return np.repeat(np.arange(k), sizes).astype(np.int64)


def _check_planted(n, k, noise):
    if not 1 <= k:
        raise ValueError("k must be at least 1")
    if k > n:
        raise ValueError(f"k={k} exceeds n={n}")
    if not 0.0 <= noise < 0.5:
        raise ValueError("noise must lie in [0, 1/2)")


def planted_oracle(n: int, k: int, noise: float, seed, budget=None) -> tuple[EdgeOracle, np.ndarray]:
    """Oracle-only planted partition: answers probes without an n x n matrix.

    Agrees pair-for-pair with :func:`generate_planted` for the same arguments.
    """
    _check_planted(n, k, noise)
    labels = _planted_labels(n, k)
    key = int(as_seed(seed).rng("planted:flip").integers(0, 2**63))

    def fn(us, vs):
        same = labels[us] == labels[vs]
        return same ^ (_pair_uniform(key, us, vs) < noise)

    return EdgeOracle(fn, n=n, budget=budget), labels


def generate_planted(n: int, k: int, noise: float, seed) -> tuple[SignedGraph, np.ndarray]:
    """k near-equal planted clusters, each pair's sign flipped with prob ``noise``.

    Returns the graph and the planted clustering (contiguous blocks).
    """
    _check_planted(n, k, noise)
    labels = _planted_labels(n, k)
    key = int(as_seed(seed).rng("planted:flip").integers(0, 2**63))
    us, vs = np.triu_indices(n, 1)
    flip = _pair_uniform(key, us, vs) < noise
    adj = np.zeros((n, n), dtype=bool)
    adj[us, vs] = (labels[us] == labels[vs]) ^ flip
    return SignedGraph(adj | adj.T), labels


@dataclass
class AdversarialParams:
    """Realised parameters of the hard instance after integral rounding."""

    n: int
    k: int
    alpha: float
    clique_size: int
    extra_per_cluster: int
    requested: dict = field(default_factory=dict)

    @property
    def num_extra(self) -> int:
        return self.k * self.extra_per_cluster


def generate_adversarial(n: int, eps: float, c: float, seed):
    """Hard instance family: k equal cliques plus sparsely attached extras.

    ``k = 1/(32 c eps)`` cliques partition the first ``(1-alpha) n`` vertices
    (``alpha = 1/(4c)``); each of the remaining vertices gets a single positive
    edge to a uniformly random clique vertex.  The integrality the
    construction needs is enforced by rounding; the realised vertex count may
    therefore differ slightly from ``n`` and is reported.

    Returns ``(graph, natural_clustering, params)``.
    """
    if not (eps > 0 and c > 0):
        raise ValueError("eps and c must be positive")
    k = max(1, round(1.0 / (32.0 * c * eps)))
    alpha = 1.0 / (4.0 * c)
    extra = max(1, round(alpha * n / k))
    clique = round((n - extra * k) / k)
    if clique < 1 or alpha >= 1:
        raise ValueError(f"n={n} too small for k={k}, alpha={alpha:.3g}")
    n_real = k * (clique + extra)
    size_a = k * clique
    rng = as_seed(seed).rng("adversarial:attach")
    r = rng.integers(0, size_a, size=n_real - size_a)
    labels = np.empty(n_real, dtype=np.int64)
    labels[:size_a] = np.arange(size_a) // clique
    labels[size_a:] = labels[r]
    adj = np.zeros((n_real, n_real), dtype=bool)
    a_lab = labels[:size_a]
    adj[:size_a, :size_a] = a_lab[:, None] == a_lab[None, :]
    b = np.arange(size_a, n_real)
    adj[b, r] = adj[r, b] = True
    params = AdversarialParams(n_real, k, (n_real - size_a) / n_real, clique, extra,
                               requested={"n": n, "eps": eps, "c": c})
    return SignedGraph(adj), labels, params
