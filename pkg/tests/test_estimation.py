import math

import numpy as np
import pytest

from localcc import estimation as est
from localcc.clustering import brute_force_opt, cost
from localcc.graph import EdgeOracle, SignedGraph, cluster_graph, planted_oracle, random_graph
from localcc.pivot import ApproxParams
from localcc.seeding import SeedContext

from conftest import pair_cost


def test_sample_pairs_are_distinct_and_uniform():
    u, w = est.sample_pairs(5, 20000, np.random.default_rng(0))
    assert (u != w).all()
    keys = np.minimum(u, w) * 5 + np.maximum(u, w)
    _, counts = np.unique(keys, return_counts=True)
    assert counts.size == 10
    assert np.abs(counts / 20000 - 0.1).max() < 0.01
    with pytest.raises(ValueError):
        est.sample_pairs(1, 3, np.random.default_rng(0))


def test_perfect_clustering_estimates_zero():
    lab = np.repeat(np.arange(3), 7)
    g = cluster_graph(lab)
    for m in (1, 10, 1000):
        assert est.clustering_error(lab, g.oracle(), m, 0) == 0.0


def test_exact_error_matches_enumeration():
    g = random_graph(9, 0.4, 2)
    lab = np.array([0, 0, 1, 1, 1, 2, 2, 0, 3])
    o = g.oracle()
    assert est.exact_clustering_error(lab, o) == pair_cost(g.adjacency, lab) / 81
    assert o.query_count == 36


def test_all_singletons_on_complete_graph():
    # cost = C(10, 2) = 45, so cost / n^2 = 0.45
    n = 10
    g = SignedGraph(np.ones((n, n), dtype=bool))
    assert cost(g, np.arange(n)) / n**2 == 0.45
    assert est.exact_clustering_error(np.arange(n), g.oracle()) == 0.45
    assert est.pair_fraction_to_cost(1.0, n) == 0.45
    hits = [abs(est.clustering_error(np.arange(n), g.oracle(), 10_000, s) - 0.45) <= 0.02
            for s in range(100)]
    assert np.mean(hits) >= 0.95


def test_estimator_is_unbiased():
    g = random_graph(12, 0.5, 9)
    lab = np.arange(12) % 3
    d = cost(g, lab) / 144
    vals = [est.clustering_error(lab, g.oracle(), 200, s) for s in range(2000)]
    se = np.std(vals, ddof=1) / math.sqrt(len(vals))
    assert abs(np.mean(vals) - d) <= 4 * se


@pytest.mark.parametrize("m", [50, 200, 800])
def test_hoeffding_deviation_rate(m):
    tau = 0.05
    g = random_graph(16, 0.5, 11)
    lab = np.arange(16) % 4
    d = cost(g, lab) / 256
    runs = 10_000
    dev = np.mean([abs(est.clustering_error(lab, g.oracle(), m, s) - d) > tau for s in range(runs)])
    bound = 2 * math.exp(-2 * m * tau**2)
    assert dev <= bound + 3 * math.sqrt(bound * (1 - min(bound, 1)) / runs) + 1e-3


def test_label_procedure_may_probe():
    g = cluster_graph(np.arange(10) % 2)
    o = g.oracle()
    probe_labels = lambda vs: np.where(o.query_many(vs, np.zeros_like(vs)) | (vs == 0), 0, 1)
    assert est.clustering_error(probe_labels, o, 100, 0) == 0.0
    assert o.query_count == 300


def _two_candidates():
    # three 4-cliques with one missing edge, against putting everything together
    lab = np.repeat(np.arange(3), 4)
    adj = cluster_graph(lab).adjacency.copy()
    adj[0, 1] = adj[1, 0] = False
    return SignedGraph(adj), lab, np.zeros(12, dtype=int)


def test_select_best_picks_low_cost_candidate():
    g, good, bad = _two_candidates()
    assert cost(g, good) == 1 and cost(g, bad) == 49
    picks = [est.select_best([bad, good], 0.1, 1 / 6, 2.0, g.oracle(), s) for s in range(500)]
    assert np.mean(np.array(picks) == 1) >= 1 - 1 / 6


def test_select_best_probe_count_and_zero_candidate():
    g = cluster_graph(np.arange(12) % 3)
    o = g.oracle()
    ns = est.select_best_sample_size(0.1, 1 / 6, 2.0, 3)
    assert ns == math.ceil(6 * math.log(18) / 0.1)
    best, scores = est.select_best([np.arange(12), np.arange(12) % 3, np.zeros(12, int)], 0.1,
                                   1 / 6, 2.0, o, 0, return_estimates=True)
    assert best == 1 and scores[1] == 0.0
    assert o.query_count == 3 * ns
    with pytest.raises(ValueError):
        est.select_best([], 0.1, 0.1, 2.0, o, 0)
    with pytest.raises(ValueError):
        est.select_best_sample_size(0.1, 0.1, 1.0, 2)


# -- tester -----------------------------------------------------------------------

def test_tester_sample_size():
    assert est.tester_sample_size(0.1) == 67_500


def test_tester_accepts_cluster_graphs():
    g = cluster_graph(np.repeat(np.arange(5), [30, 20, 10, 10, 10]))
    res = [est.test_clusterable(0.2, g.oracle(), s) for s in range(30)]
    assert all(r.accept and r.verdict == "accept" for r in res)
    assert all(r.exact for r in res)


def test_tester_rejects_far_graphs():
    g = random_graph(12, 0.5, 503)
    opt = brute_force_opt(g).opt_cost
    assert opt > 0.1 * 144
    res = [est.test_clusterable(0.1, g.oracle(), s) for s in range(30)]
    assert not any(r.accept for r in res)
    assert all(r.threshold == pytest.approx(0.1 * 14 / 15) for r in res)


def test_tester_sampled_mode_on_large_oracle():
    o, _ = planted_oracle(3000, 3, 0.0, 1)
    r = est.test_clusterable(0.3, o, 0)
    assert not r.exact and r.samples == est.tester_sample_size(0.3)
    assert r.accept and r.estimate == 0.0 and r.queries == o.query_count


def test_tester_validates_eps():
    with pytest.raises(ValueError):
        est.test_clusterable(1.5, SignedGraph.empty(3).oracle(), 0)


# -- edit distance ------------------------------------------------------------------

def test_edit_distance_on_cluster_graph():
    g = cluster_graph(np.arange(40) % 4)
    r = est.estimate_edit_distance(0.2, g.oracle(), 0)
    assert r.estimate <= 0.2 and r.lower_bound == 0.0 and r.upper_bound == r.estimate


def test_edit_distance_brackets_opt():
    eps = 0.2
    for gs in range(4):
        g = random_graph(12, (0.3, 0.5)[gs % 2], 600 + gs)
        opt = brute_force_opt(g).opt_cost / 144
        ok = [opt - eps <= est.estimate_edit_distance(eps, g.oracle(), s).estimate <= 4 * opt + eps
              for s in range(30)]
        assert np.mean(ok) >= 2 / 3


def test_edit_distance_probe_count_does_not_grow_with_n():
    # every sampled pair costs one probe plus at most q pivot probes per endpoint
    eps = 0.2
    p = ApproxParams(eps)
    q = math.ceil(6 / eps)
    m = math.ceil(27 / eps**2)
    bound = p.candidate_count * (q * q + (2 * q + 1) * p.estimate_samples()) + (2 * q + 1) * m
    counts = []
    for n in (64, 1024, 16384):
        o = EdgeOracle(lambda us, vs: np.zeros(np.shape(us), dtype=bool), n=n)
        counts.append(est.estimate_edit_distance(eps, o, SeedContext(1)).queries)
    assert max(counts) <= bound
    # pivots are hit less often as n grows, so counts rise towards the bound
    assert counts == sorted(counts) and counts[-1] / counts[-2] < 1.02
