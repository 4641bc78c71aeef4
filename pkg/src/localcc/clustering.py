"""Clusterings, the disagreement cost and reference algorithms.

A clustering is a length-``n`` integer array of labels.  Labels carry no order,
only equality matters, so every function here is invariant under relabelling.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import connected_components

from .graph import EdgeOracle, SignedGraph, cluster_graph, graph_distance
from .seeding import as_seed

__all__ = [
    "as_labels",
    "canonical_labels",
    "cost",
    "fractional_cost",
    "agreements",
    "connected_components_clustering",
    "BruteForceResult",
    "brute_force_opt",
    "quick_cluster",
    "clustering_distance",
]

BRUTE_FORCE_LIMIT = 12


def as_labels(labels, n: int | None = None) -> np.ndarray:
    arr = np.asarray(labels, dtype=np.int64)
    if arr.ndim != 1:
        raise ValueError("a clustering is a 1-d label array")
    if n is not None and arr.size != n:
        raise ValueError(f"clustering has {arr.size} labels, graph has {n} vertices")
    if (arr < 0).any():
        raise ValueError("cluster labels must be non-negative")
    return arr


def canonical_labels(labels) -> np.ndarray:
    """Relabel to 0, 1, 2, ... in order of first appearance."""
    _, first, inv = np.unique(np.asarray(labels), return_index=True, return_inverse=True)
    order = np.argsort(np.argsort(first))
    return order[inv].astype(np.int64)


def _disagreements(adj: np.ndarray, labels: np.ndarray) -> np.ndarray:
    same = labels[:, None] == labels[None, :]
    return np.triu(adj != same, 1)


def cost(g: SignedGraph, labels) -> int:
    """Disagreements over unordered distinct pairs.

    A positive pair split across clusters or a negative pair sharing one
    costs 1.
    """
    labels = as_labels(labels, g.n)
    return int(_disagreements(g.adjacency, labels).sum())


def fractional_cost(g: SignedGraph, labels) -> float:
    return cost(g, labels) / g.n**2 if g.n else 0.0


def agreements(g: SignedGraph, labels) -> int:
    return g.n * (g.n - 1) // 2 - cost(g, labels)


def connected_components_clustering(g: SignedGraph) -> np.ndarray:
    """Components of the positive graph, labelled by their smallest vertex."""
    _, comp = connected_components(csr_matrix(g.adjacency), directed=False)
    rep = np.full(comp.max() + 1 if g.n else 0, g.n, dtype=np.int64)
    np.minimum.at(rep, comp, np.arange(g.n))
    return rep[comp]


@dataclass
class BruteForceResult:
    opt_cost: int
    opt_clustering: np.ndarray


def _subset_weights(adj: np.ndarray) -> np.ndarray:
    """w[mask] = (#negative - #positive) pairs inside ``mask``."""
    n = adj.shape[0]
    rows = np.array([sum(1 << j for j in range(n) if adj[i, j]) for i in range(n)], dtype=np.int64)
    masks = np.arange(1 << n, dtype=np.int64)
    pos = np.zeros(1 << n, dtype=np.int64)
    for b in range(n):
        lo, hi = 1 << b, 1 << (b + 1)
        m = masks[lo:hi]
        pos[lo:hi] = pos[m ^ lo] + np.bitwise_count(rows[b] & (m ^ lo))
    size = np.bitwise_count(masks).astype(np.int64)
    return size * (size - 1) // 2 - 2 * pos


def _submask_tables(n: int):
    """For each popcount p, the 0/1 bit pattern of every integer below 2**p."""
    return [((np.arange(1 << p)[:, None] >> np.arange(p)) & 1).astype(np.int64)
            for p in range(n + 1)]


def brute_force_opt(g: SignedGraph, max_clusters: int | None = None,
                    limit: int = BRUTE_FORCE_LIMIT) -> BruteForceResult:
    """Exact optimum over all set partitions (or those with <= max_clusters blocks).

    Uses dynamic programming over vertex subsets: the cost of a partition is
    ``#positive + sum over blocks of (#negative - #positive inside)``, and the
    block containing the lowest remaining vertex is enumerated among its
    submasks.  ``3**n`` work; refuses graphs above ``limit`` vertices.
    """
    n = g.n
    if n > limit:
        raise ValueError(f"brute force limited to n <= {limit} (got {n})")
    if n == 0:
        return BruteForceResult(0, np.zeros(0, dtype=np.int64))
    w = _subset_weights(g.adjacency)
    tables = _submask_tables(n)
    full = (1 << n) - 1
    levels = 1 if max_clusters is None else max(1, min(max_clusters, n))
    inf = np.iinfo(np.int64).max // 4

    # f[j][S]: best weight of S using at most j+1 blocks (one level when unbounded)
    f = np.full((levels, 1 << n), inf, dtype=np.int64)
    choice = np.zeros((levels, 1 << n), dtype=np.int64)
    f[:, 0] = 0
    f[0, 1:] = w[1:]
    choice[0, 1:] = np.arange(1, 1 << n)
    for s in range(1, 1 << n):
        low = s & -s
        rest = s ^ low
        bits = [b for b in range(n) if rest >> b & 1]
        subs = low | (tables[len(bits)] @ (np.int64(1) << np.array(bits, dtype=np.int64))
                      if bits else np.zeros(1, dtype=np.int64))
        if max_clusters is None:
            vals = w[subs] + f[0, s ^ subs]
            i = int(np.argmin(vals))
            f[0, s], choice[0, s] = vals[i], subs[i]
        else:
            for j in range(1, levels):
                prev = f[j - 1, s ^ subs]
                vals = np.where(prev >= inf, inf, w[subs] + prev)
                i = int(np.argmin(vals))
                if vals[i] < f[j - 1, s]:
                    f[j, s], choice[j, s] = vals[i], subs[i]
                else:
                    f[j, s], choice[j, s] = f[j - 1, s], -1
    labels = np.empty(n, dtype=np.int64)
    s, j, lab = full, levels - 1, 0
    while s:
        c = choice[j, s]
        while c == -1:
            j -= 1
            c = choice[j, s]
        members = [b for b in range(n) if c >> b & 1]
        labels[members] = lab
        lab += 1
        s ^= c
        j = max(j - 1, 0) if max_clusters is not None else 0
    opt = int(g.num_positive() + f[levels - 1, full])
    result = BruteForceResult(opt, labels)
    assert cost(g, labels) == opt
    return result


def quick_cluster(oracle: EdgeOracle, seed) -> np.ndarray:
    """Pivot clustering over a seed-determined random vertex order.

    Each unclustered vertex met in order becomes a pivot and absorbs its
    unclustered positive neighbours.  Labels are pivot ids.
    """
    n = oracle.n
    order = as_seed(seed).rng("quick:perm").permutation(n)
    labels = np.full(n, -1, dtype=np.int64)
    for v in order:
        if labels[v] >= 0:
            continue
        labels[v] = v
        rest = np.flatnonzero(labels < 0)
        if rest.size:
            hit = oracle.query_many(np.full(rest.size, v), rest)
            labels[rest[hit]] = v
    return labels


def clustering_distance(c1, c2, fractional: bool = False):
    """Pairs co-clustered in exactly one of the two clusterings."""
    c1, c2 = as_labels(c1), as_labels(c2)
    if c1.size != c2.size:
        raise ValueError(f"clusterings have different sizes: {c1.size} != {c2.size}")
    return graph_distance(cluster_graph(c1), cluster_graph(c2), fractional=fractional)
