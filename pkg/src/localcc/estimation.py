"""Pair-sampling estimators, candidate selection and the clusterability tester."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .graph import EdgeOracle
from .seeding import as_seed

__all__ = [
    "sample_pairs",
    "labels_fn",
    "clustering_error",
    "exact_clustering_error",
    "pair_fraction_to_cost",
    "select_best_sample_size",
    "select_best",
    "TestResult",
    "tester_sample_size",
    "test_clusterable",
    "EditDistanceEstimate",
    "estimate_edit_distance",
]


def sample_pairs(n: int, m: int, rng: np.random.Generator) -> tuple[np.ndarray, np.ndarray]:
    """m unordered pairs of distinct vertices, uniform and with replacement."""
    if n < 2:
        raise ValueError("pair sampling needs at least two vertices")
    u = rng.integers(0, n, size=m)
    w = rng.integers(0, n - 1, size=m)
    w = w + (w >= u)
    return u, w


def labels_fn(labels) -> Callable[[np.ndarray], np.ndarray]:
    """Wrap an explicit label array as a (probe-free) label procedure."""
    arr = np.asarray(labels, dtype=np.int64)
    return lambda vs: arr[vs]


def _as_label_fn(label_fn):
    return label_fn if callable(label_fn) else labels_fn(label_fn)


def _pair_disagreement(oracle, label_fn, u, w) -> np.ndarray:
    pos = oracle.query_many(u, w)
    same = label_fn(u) == label_fn(w)
    return pos != same


def clustering_error(label_fn, oracle: EdgeOracle, m: int, seed, tag: str = "estimate") -> float:
    """Estimate the fractional cost (cost / n**2) of a clustering from m pairs.

    ``label_fn`` maps an array of vertices to their labels (it may itself probe
    the oracle) or is an explicit label array.  Pairs are uniform unordered
    distinct pairs drawn with replacement; the disagreeing fraction is rescaled
    by ``C(n,2)/n**2`` so the estimate is unbiased for cost / n**2, and each
    summand lies in ``[0, 1/2)`` so Hoeffding's ``exp(-2 m tau^2)`` applies.
    """
    if m < 1:
        raise ValueError("need at least one sample")
    n = oracle.n
    if n < 2:
        return 0.0
    u, w = sample_pairs(n, m, as_seed(seed).rng(tag))
    frac = _pair_disagreement(oracle, _as_label_fn(label_fn), u, w).mean()
    return pair_fraction_to_cost(float(frac), n)


def exact_clustering_error(label_fn, oracle: EdgeOracle) -> float:
    """Exact cost / n**2 of a label procedure, probing every pair once."""
    n = oracle.n
    if n < 2:
        return 0.0
    u, w = np.triu_indices(n, 1)
    return float(_pair_disagreement(oracle, _as_label_fn(label_fn), u, w).sum()) / n**2


def pair_fraction_to_cost(frac: float, n: int) -> float:
    """Convert a disagreeing-pair fraction into fractional cost (cost / n**2)."""
    return frac * (n - 1) / (2 * n) if n else 0.0


def select_best_sample_size(eps: float, delta: float, c: float, count: int) -> int:
    if c <= 1:
        raise ValueError("gap ratio c must exceed 1")
    return math.ceil(3 * c / (c - 1) ** 2 * math.log(count / delta) / eps)


def select_best(candidates: Sequence, eps: float, delta: float, c: float,
                oracle: EdgeOracle, seed, return_estimates: bool = False):
    """Index of a candidate whose cost is within factor c of the best one.

    Each candidate is scored on its own ``ceil(3c/(c-1)^2 ln(M/delta)/eps)``
    sampled pairs; the lowest score wins (first index on ties).
    """
    if not candidates:
        raise ValueError("no candidates")
    ns = select_best_sample_size(eps, delta, c, len(candidates))
    ctx = as_seed(seed)
    est = [clustering_error(cand, oracle, ns, ctx, tag=f"select:{i}")
           for i, cand in enumerate(candidates)]
    best = int(np.argmin(est))
    return (best, est) if return_estimates else best


@dataclass
class TestResult:
    accept: bool
    estimate: float
    threshold: float
    samples: int
    exact: bool
    queries: int
    pivots: np.ndarray

    __test__ = False  # not a pytest class

    @property
    def verdict(self) -> str:
        return "accept" if self.accept else "reject"


def tester_sample_size(eps: float) -> int:
    return math.ceil(27 * (5 / eps) ** 2)


def test_clusterable(eps: float, oracle: EdgeOracle, seed, params=None) -> TestResult:
    """Two-sided clusterability tester.

    Picks pivots at accuracy eps/5 and accepts iff the resulting clustering's
    estimated fractional cost is at most ``(1 - 1/15) eps``.  When sampling
    would need more pairs than the graph has, every pair is evaluated exactly.
    """
    from .pivot import ApproxParams, find_cluster_fn, find_good_pivots

    if not 0 < eps < 1:
        raise ValueError("eps must lie in (0, 1)")
    start = oracle.query_count
    inner = ApproxParams(eps / 5) if params is None else params.with_eps(eps / 5)
    handle = find_good_pivots(inner, oracle, as_seed(seed).child("tester"))
    fn = find_cluster_fn(handle.pivots, oracle)
    n = oracle.n
    m = tester_sample_size(eps)
    total = n * (n - 1) // 2
    exact = total <= m
    if exact:
        est = exact_clustering_error(fn, oracle)
    else:
        est = clustering_error(fn, oracle, m, as_seed(seed), tag="tester:estimate")
    threshold = (1 - 1 / 15) * eps
    return TestResult(est <= threshold, est, threshold, total if exact else m, exact,
                      oracle.query_count - start, handle.pivots)


@dataclass
class EditDistanceEstimate:
    estimate: float
    samples: int
    queries: int
    lower_bound: float

    @property
    def upper_bound(self) -> float:
        return self.estimate


def estimate_edit_distance(eps: float, oracle: EdgeOracle, seed, params=None) -> EditDistanceEstimate:
    """Estimate cluster edit distance / n**2 from the local clustering.

    The returned ``estimate`` is the sampled fractional cost of the
    local-clustering labelling, an upper-bound style estimate: with the pivot
    guarantee it lies in ``[OPT/n^2 - eps/3, 4 OPT/n^2 + eps]`` w.h.p.
    ``lower_bound`` is ``(estimate - eps) / 4``.
    """
    from .pivot import ApproxParams, find_cluster_fn, find_good_pivots

    if not 0 < eps < 1:
        raise ValueError("eps must lie in (0, 1)")
    start = oracle.query_count
    inner = ApproxParams(eps) if params is None else params.with_eps(eps)
    ctx = as_seed(seed)
    handle = find_good_pivots(inner, oracle, ctx)
    m = math.ceil(27 / eps**2)
    est = clustering_error(find_cluster_fn(handle.pivots, oracle), oracle, m, ctx,
                           tag="edit-distance")
    return EditDistanceEstimate(est, m, oracle.query_count - start,
                                max(0.0, (est - eps) / 4))
