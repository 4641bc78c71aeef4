import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from localcc.clustering import cost
from localcc.graph import (EdgeOracle, GraphFormatError, NeighborhoodOracle, QueryBudgetExceeded,
                           SignedGraph, WeightedGraph, cluster_graph, format_clustering,
                           format_graph, generate_adversarial, generate_planted, graph_distance,
                           parse_clustering, parse_graph, planted_oracle, random_graph,
                           round_weighted)
from localcc.seeding import SeedContext, as_seed

from conftest import pair_cost


@st.composite
def graphs(draw, n_max=9):
    n = draw(st.integers(1, n_max))
    bits = draw(st.lists(st.booleans(), min_size=n * (n - 1) // 2, max_size=n * (n - 1) // 2))
    adj = np.zeros((n, n), dtype=bool)
    adj[np.triu_indices(n, 1)] = bits
    return SignedGraph(adj | adj.T)


# -- parsing ------------------------------------------------------------------

def test_parse_single_edge():
    g = parse_graph("n 3\n0 1\n")
    assert isinstance(g, SignedGraph)
    assert g.is_positive(0, 1) and g.is_positive(1, 0)
    assert not g.is_positive(0, 2) and not g.is_positive(1, 2)


def test_parse_empty_edge_list():
    g = parse_graph("n 2\n")
    assert g.n == 2 and g.num_positive() == 0


def test_parse_weighted():
    g = parse_graph("n 3\n0 1 0.7\n", weighted=True)
    assert isinstance(g, WeightedGraph)
    assert g.weights[0, 1] == g.weights[1, 0] == 0.7
    assert g.weights[0, 2] == 0 and g.weights[1, 2] == 0


def test_parse_infers_weighted_mode():
    assert isinstance(parse_graph("n 3\n0 1 0.25\n"), WeightedGraph)


def test_comments_and_blank_lines_are_skipped():
    g = parse_graph("# a graph\n\nn 3\n# edge\n1 2\n")
    assert g.positive_edges() == [(1, 2)]


@pytest.mark.parametrize("text", [
    "", "m 3\n", "n x\n", "n -1\n", "n 3\n0 3\n", "n 3\n1 1\n", "n 3\n0\n", "n 3\n0 a\n",
    "n 3\n0 1 2 3\n",
])
def test_malformed_graphs(text):
    with pytest.raises(GraphFormatError):
        parse_graph(text, weighted=False)


@pytest.mark.parametrize("text", ["n 3\n0 1 1.5\n", "n 3\n0 1 0.2\n1 0 0.3\n", "n 3\n0 1 x\n"])
def test_malformed_weighted(text):
    with pytest.raises(GraphFormatError):
        parse_graph(text, weighted=True)


@settings(max_examples=40, deadline=None)
@given(graphs())
def test_format_roundtrip(g):
    assert parse_graph(format_graph(g)) == g


def test_weighted_roundtrip():
    w = np.zeros((4, 4))
    w[0, 1] = w[1, 0] = 0.125
    w[2, 3] = w[3, 2] = 1.0
    g = WeightedGraph(w)
    back = parse_graph(format_graph(g), weighted=True)
    assert np.array_equal(back.weights, g.weights)


def test_clustering_roundtrip_and_errors():
    lab = np.array([2, 0, 2, 1])
    assert np.array_equal(parse_clustering(format_clustering(lab)), lab)
    with pytest.raises(GraphFormatError):
        parse_clustering("0 1\n2 1\n")
    with pytest.raises(GraphFormatError):
        parse_clustering("0 1\n1 -1\n")
    with pytest.raises(GraphFormatError):
        parse_clustering("0 1\n1 1\n", n=3)


def test_signed_graph_validation():
    with pytest.raises(ValueError):
        SignedGraph(np.array([[0, 1], [0, 0]], dtype=bool))
    with pytest.raises(ValueError):
        SignedGraph(np.zeros((2, 3), dtype=bool))
    g = SignedGraph(np.ones((3, 3), dtype=bool))
    assert not g.adjacency.diagonal().any()
    with pytest.raises(ValueError):
        g.adjacency[0, 1] = False


# -- rounding and distance ----------------------------------------------------------

@pytest.mark.parametrize("s, positive", [(0.7, True), (0.3, False), (0.5, True)])
def test_round_weighted(s, positive):
    w = np.zeros((2, 2))
    w[0, 1] = w[1, 0] = s
    assert round_weighted(WeightedGraph(w)).is_positive(0, 1) is positive


def test_distance_identity_and_single_flip():
    g = random_graph(7, 0.5, 3)
    assert graph_distance(g, g) == 0
    adj = g.adjacency.copy()
    adj[2, 5] = adj[5, 2] = not adj[2, 5]
    assert graph_distance(g, SignedGraph(adj)) == 1


def test_distance_matches_pair_scan():
    for s in range(5):
        g1, g2 = random_graph(8, 0.4, s), random_graph(8, 0.6, 100 + s)
        scan = sum(g1.is_positive(u, v) != g2.is_positive(u, v)
                   for u, v in itertools.combinations(range(8), 2))
        assert graph_distance(g1, g2) == scan
        assert graph_distance(g1, g2, fractional=True) == scan / 64


def test_distance_size_mismatch():
    with pytest.raises(ValueError):
        graph_distance(SignedGraph.empty(3), SignedGraph.empty(4))


# -- oracle accounting ------------------------------------------------------------

def test_oracle_counts_every_probe_including_repeats():
    g = SignedGraph.from_edges(4, [(0, 1)])
    o = g.oracle()
    assert o.query(0, 1) and o(1, 0)
    assert not o.query(2, 2)
    o.query_many([0, 0, 0], [1, 2, 3])
    assert o.query_count == 6


def test_oracle_budget():
    o = SignedGraph.empty(5).oracle(budget=3)
    o.query_many([0, 1], [2, 3])
    with pytest.raises(QueryBudgetExceeded):
        o.query_many([0, 1], [2, 3])
    assert o.query_count == 2


def test_first_positive_charges_prefix_only():
    g = SignedGraph.from_edges(6, [(0, 4)])
    o = g.oracle(record=True)
    assert o.first_positive(0, [1, 2, 4, 5]) == 2
    assert o.query_count == 3
    assert o.probed_pairs() == [(0, 1), (0, 2), (0, 4)]
    assert o.first_positive(0, [1, 2]) == -1
    assert o.query_count == 5
    assert o.first_positive(0, []) == -1 and o.query_count == 5


def test_probed_pairs_requires_record():
    with pytest.raises(RuntimeError):
        SignedGraph.empty(2).oracle().probed_pairs()


def test_function_oracle_never_reports_self_pairs():
    o = EdgeOracle(lambda us, vs: np.ones(np.shape(us), dtype=bool), n=4)
    assert not o.query(1, 1) and o.query(1, 2)
    with pytest.raises(ValueError):
        EdgeOracle(lambda us, vs: us == vs)


def test_neighborhood_oracle_steps():
    g = SignedGraph.from_edges(5, [(0, 1), (0, 2), (0, 3)])
    nb = NeighborhoodOracle(g)
    assert nb.neighbors(0) == [1, 2, 3] and nb.steps == 4
    assert nb.neighbors(0, start=1, limit=1) == [2] and nb.steps == 6
    assert nb.neighbors(4) == [] and nb.steps == 7


# -- seeding --------------------------------------------------------------------

def test_seed_streams_are_independent_and_reproducible():
    a = SeedContext(9).rng("x").integers(0, 1 << 30, 4)
    b = SeedContext(9).rng("x").integers(0, 1 << 30, 4)
    c = SeedContext(9).rng("y").integers(0, 1 << 30, 4)
    d = SeedContext(9).child("z").rng("x").integers(0, 1 << 30, 4)
    assert (a == b).all() and not (a == c).all() and not (a == d).all()
    assert as_seed(SeedContext(3)) == SeedContext(3) and as_seed(3) == SeedContext(3)


def test_seed_from_env(monkeypatch):
    monkeypatch.setenv("LOCALCC_SEED", "41")
    assert SeedContext.from_env().seed == 41
    monkeypatch.delenv("LOCALCC_SEED")
    assert SeedContext.from_env(default=5).seed == 5


# -- generators -----------------------------------------------------------------

def test_planted_zero_noise_is_two_triangles():
    g, lab = generate_planted(6, 2, 0.0, 1)
    assert g == cluster_graph([0, 0, 0, 1, 1, 1])
    assert cost(g, lab) == 0


def test_planted_cost_counts_flips():
    g, lab = generate_planted(6, 2, 0.1, 4)
    clean = cluster_graph(lab)
    flips = sum(g.is_positive(u, v) != clean.is_positive(u, v)
                for u, v in itertools.combinations(range(6), 2))
    assert cost(g, lab) == flips == pair_cost(g.adjacency, lab)


def test_planted_single_vertex():
    g, lab = generate_planted(1, 1, 0.3, 0)
    assert g.n == 1 and cost(g, lab) == 0


def test_planted_oracle_agrees_with_graph():
    g, lab = generate_planted(30, 3, 0.2, 8)
    o, lab2 = planted_oracle(30, 3, 0.2, 8)
    us, vs = np.triu_indices(30, 1)
    assert np.array_equal(o.query_many(us, vs), g.adjacency[us, vs])
    assert np.array_equal(lab, lab2)


@pytest.mark.parametrize("args", [(5, 0, 0.1), (5, 6, 0.1), (5, 2, 0.5), (5, 2, -0.1)])
def test_planted_rejects_bad_parameters(args):
    with pytest.raises(ValueError):
        generate_planted(*args, seed=0)


def test_random_graph_density():
    g = random_graph(200, 0.3, 1)
    assert abs(g.num_positive() / (200 * 199 / 2) - 0.3) < 0.02


def _adversarial_natural_cost(params, labels):
    # B-pairs sharing a cluster are negative; each B vertex is also negative
    # to every clique vertex of its cluster except its anchor
    size_a = params.k * params.clique_size
    b_lab = labels[size_a:]
    _, counts = np.unique(b_lab, return_counts=True)
    return int(sum(c * (c - 1) // 2 for c in counts)) + b_lab.size * (params.clique_size - 1)


def test_adversarial_small_instance():
    g, lab, prm = generate_adversarial(40, 1 / 32, 1.0, 0)
    assert prm.k == 1 and prm.n == 40 and prm.num_extra == 10
    size_b = prm.num_extra
    assert pair_cost(g.adjacency, lab) == cost(g, lab)
    assert cost(g, lab) == math.comb(size_b, 2) + size_b * (prm.clique_size - 1)
    assert cost(g, lab) == _adversarial_natural_cost(prm, lab)


def test_adversarial_structure():
    g, lab, prm = generate_adversarial(120, 1 / 96, 1.0, 5)
    size_a = prm.k * prm.clique_size
    assert prm.k == 3
    adj = g.adjacency
    # each extra vertex has exactly one positive edge, into the clique part
    assert (adj[size_a:].sum(axis=1) == 1).all()
    assert not adj[size_a:, size_a:].any()
    assert cost(g, lab) == _adversarial_natural_cost(prm, lab)


def test_adversarial_single_extra_vertex():
    # |B| = 1: no B-pairs, only the negatives between the extra and its clique
    g, lab, prm = generate_adversarial(8, 1 / 64, 2.0, 0)
    assert prm.k == 1 and prm.num_extra == 1
    assert cost(g, lab) == prm.clique_size - 1


def test_adversarial_opt_bound_by_monte_carlo():
    # moving every extra vertex to a singleton costs |B| <= (eps/c) n^2
    eps, c = 1 / 64, 1.0
    vals = []
    for s in range(50):
        g, lab, prm = generate_adversarial(64, eps, c, s)
        size_a = prm.k * prm.clique_size
        lab = lab.copy()
        lab[size_a:] = lab.max() + 1 + np.arange(g.n - size_a)
        vals.append(cost(g, lab))
    assert np.mean(vals) <= eps / c * 64**2


def test_adversarial_rejects_tiny_n():
    with pytest.raises(ValueError):
        generate_adversarial(3, 1 / 320, 1.0, 0)
    with pytest.raises(ValueError):
        generate_adversarial(10, 0.0, 1.0, 0)
