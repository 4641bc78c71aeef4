import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from localcc.clustering import (agreements, brute_force_opt, canonical_labels, clustering_distance,
                                connected_components_clustering, cost, fractional_cost,
                                quick_cluster)
from localcc.graph import SignedGraph, cluster_graph, generate_planted, random_graph

from conftest import all_labelings, brute_opt, pair_cost, same_partition, set_partitions
from test_graph import graphs


def test_set_partition_oracle_counts_bell_numbers():
    bell = [1, 1, 2, 5, 15, 52, 203, 877]
    assert [sum(1 for _ in set_partitions(range(n))) for n in range(8)] == bell


def test_cost_of_perfect_clustering():
    lab = [0, 0, 0, 1, 1]
    assert cost(cluster_graph(lab), lab) == 0


def test_cost_on_path():
    g = SignedGraph.from_edges(3, [(0, 1), (1, 2)])
    assert cost(g, [0, 0, 0]) == 1
    assert cost(g, [0, 1, 2]) == 2


@settings(max_examples=60, deadline=None)
@given(graphs(), st.data())
def test_cost_matches_pair_scan(g, data):
    lab = np.array(data.draw(st.lists(st.integers(0, 3), min_size=g.n, max_size=g.n)))
    assert cost(g, lab) == pair_cost(g.adjacency, lab)
    assert agreements(g, lab) == g.n * (g.n - 1) // 2 - cost(g, lab)
    assert fractional_cost(g, lab) == cost(g, lab) / g.n**2
    # relabelling invariance
    assert cost(g, lab) == cost(g, canonical_labels(lab + 7))


@settings(max_examples=30, deadline=None)
@given(graphs())
def test_singletons_cost_positive_edges(g):
    assert cost(g, np.arange(g.n)) == g.num_positive()


def test_cost_validates_labels():
    g = SignedGraph.empty(3)
    with pytest.raises(ValueError):
        cost(g, [0, 1])
    with pytest.raises(ValueError):
        cost(g, [0, -1, 0])


def test_canonical_labels():
    assert canonical_labels([5, 5, 2, 9, 2]).tolist() == [0, 0, 1, 2, 1]


def test_connected_components():
    assert same_partition(connected_components_clustering(cluster_graph([0, 1, 0, 1])), [0, 1, 0, 1])
    assert connected_components_clustering(SignedGraph.empty(4)).tolist() == [0, 1, 2, 3]
    g = SignedGraph.from_edges(3, [(0, 1), (1, 2)])
    assert connected_components_clustering(g).tolist() == [0, 0, 0]


def test_brute_force_triangle():
    g = SignedGraph.from_edges(3, [(0, 1), (0, 2)])
    assert brute_force_opt(g).opt_cost == 1


def test_brute_force_trivial_cases():
    assert brute_force_opt(cluster_graph([0, 1, 1, 0, 2])).opt_cost == 0
    r = brute_force_opt(SignedGraph.empty(1))
    assert r.opt_cost == 0 and r.opt_clustering.tolist() == [0]
    assert brute_force_opt(SignedGraph.empty(0)).opt_cost == 0


def test_brute_force_matches_enumeration():
    for s in range(12):
        n = 3 + s % 6
        g = random_graph(n, (0.3, 0.5, 0.7)[s % 3], s)
        r = brute_force_opt(g)
        assert r.opt_cost == brute_opt(g.adjacency)
        assert cost(g, r.opt_clustering) == r.opt_cost


def test_brute_force_bounded_clusters():
    for s in range(6):
        g = random_graph(7, 0.3, 40 + s)
        for k in (1, 2, 3):
            r = brute_force_opt(g, max_clusters=k)
            assert r.opt_cost == brute_opt(g.adjacency, max_blocks=k)
            assert np.unique(r.opt_clustering).size <= k


def test_brute_force_refuses_large_graphs():
    with pytest.raises(ValueError):
        brute_force_opt(SignedGraph.empty(13))


def test_quick_cluster_perfect_on_cluster_graphs():
    lab = np.repeat(np.arange(4), [5, 3, 6, 2])
    g = cluster_graph(lab)
    for s in range(10):
        assert cost(g, quick_cluster(g.oracle(), s)) == 0


def test_quick_cluster_edgeless_probes():
    n = 30
    o = SignedGraph.empty(n).oracle()
    lab = quick_cluster(o, 0)
    assert lab.tolist() == list(range(n))
    assert o.query_count == n * (n - 1) // 2


def test_quick_cluster_expected_three_approximation():
    # mean over seeds within 3 OPT plus three standard errors
    for gs in range(3):
        g = random_graph(9, 0.5, 70 + gs)
        opt = brute_opt(g.adjacency)
        c = np.array([cost(g, quick_cluster(g.oracle(), s)) for s in range(2000)])
        assert c.mean() <= 3 * opt + 3 * c.std(ddof=1) / math.sqrt(c.size)


def test_quick_cluster_is_seed_deterministic():
    g, _ = generate_planted(40, 3, 0.2, 1)
    assert np.array_equal(quick_cluster(g.oracle(), 5), quick_cluster(g.oracle(), 5))


def test_clustering_distance():
    assert clustering_distance([0, 0, 1], [4, 4, 9]) == 0
    assert clustering_distance([0, 0, 0], [0, 1, 2]) == 3
    rng = np.random.default_rng(3)
    for _ in range(5):
        a, b = rng.integers(0, 3, 8), rng.integers(0, 3, 8)
        scan = sum((a[u] == a[v]) != (b[u] == b[v]) for u in range(8) for v in range(u + 1, 8))
        assert clustering_distance(a, b) == scan
        assert clustering_distance(a, b, fractional=True) == scan / 64
    with pytest.raises(ValueError):
        clustering_distance([0, 1], [0, 1, 2])


def test_all_labelings_helper_respects_block_cap():
    assert all(np.unique(lab).size <= 2 for lab in all_labelings(5, 2))
