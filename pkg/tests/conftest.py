"""Independent brute-force oracles shared by the unit tests.

Nothing here calls into localcc beyond data containers, so the tests compare
the library against code paths written separately.
"""

import itertools

import numpy as np
import pytest


def set_partitions(items):
    """Every set partition of ``items`` as a list of blocks (recursive)."""
    items = list(items)
    if not items:
        yield []
        return
    first, rest = items[0], items[1:]
    for part in set_partitions(rest):
        for i in range(len(part)):
            yield part[:i] + [[first] + part[i]] + part[i + 1:]
        yield [[first]] + part


def partition_labels(n, blocks):
    lab = np.empty(n, dtype=np.int64)
    for j, b in enumerate(blocks):
        lab[b] = j
    return lab


def all_labelings(n, max_blocks=None):
    for part in set_partitions(range(n)):
        if max_blocks is None or len(part) <= max_blocks:
            yield partition_labels(n, part)


def pair_cost(adj, labels):
    """Disagreements by an explicit double loop over unordered pairs."""
    n = len(labels)
    c = 0
    for u, v in itertools.combinations(range(n), 2):
        c += bool(adj[u][v]) != (labels[u] == labels[v])
    return c


def brute_opt(adj, max_blocks=None):
    n = len(adj)
    return min(pair_cost(adj, lab) for lab in all_labelings(n, max_blocks))


def same_partition(a, b):
    a, b = np.asarray(a), np.asarray(b)
    return bool(((a[:, None] == a[None, :]) == (b[:, None] == b[None, :])).all())


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
