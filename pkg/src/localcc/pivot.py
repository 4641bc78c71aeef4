"""Local pivot clustering: pivot sequences, candidate selection and drivers.

A pivot sequence ``P`` defines a clustering implicitly: a vertex joins the
first pivot it is positively adjacent to, or stays alone.  Everything random
comes from a :class:`~localcc.seeding.SeedContext`, so evaluating one vertex
at a time, in any order or in parallel, reproduces one global clustering.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Callable

import numpy as np

from .estimation import clustering_error, sample_pairs
from .graph import EdgeOracle, NeighborhoodOracle, QueryBudgetExceeded, SignedGraph
from .seeding import SeedContext, as_seed

__all__ = [
    "ApproxParams",
    "find_cluster",
    "find_cluster_many",
    "find_cluster_fn",
    "independent_set",
    "pivot_sample_size",
    "find_pivots",
    "PivotPlan",
    "pivot_plan",
    "PivotHandle",
    "find_good_pivots",
    "local_cluster",
    "explicit_cluster",
    "BoostResult",
    "boosted_cluster",
    "HybridResult",
    "hybrid_cluster",
    "uncovered_edges",
    "PivotProcessTrace",
    "deletion_process",
    "alpha_recurrence",
]

_CEIL_SLACK = 1e-9


@dataclass(frozen=True)
class ApproxParams:
    """Knobs of the local pivot pipeline.

    eps : target accuracy in (0, 1).
    candidate_count : independent pivot candidates tried (16).
    inner_divisor : candidates use accuracy ``eps / inner_divisor`` (12).
    estimator : ``"multiplicative"`` uses ``ceil(C ln(16 M / delta) / eps)``
        pairs per candidate, ``"additive"`` uses ``ceil(C / eps**2)``.
    r, s : Markov trade-off of a single candidate; failure bound ``1/r + 1/s``.
    """

    eps: float
    candidate_count: int = 16
    inner_divisor: float = 12.0
    estimator: str = "multiplicative"
    C: float = 27.0
    delta: float = 1 / 6
    r: float = 4 / 3
    s: float = 8.0

    def __post_init__(self):
        if not 0 < self.eps < 1:
            raise ValueError(f"eps must lie in (0, 1), got {self.eps}")
        if self.candidate_count < 1:
            raise ValueError("candidate_count must be at least 1")
        if self.estimator not in ("multiplicative", "additive"):
            raise ValueError(f"unknown estimator {self.estimator!r}")

    def with_eps(self, eps: float) -> "ApproxParams":
        return replace(self, eps=eps)

    @property
    def inner_eps(self) -> float:
        return self.eps / self.inner_divisor

    def estimate_samples(self) -> int:
        if self.estimator == "additive":
            return math.ceil(self.C / self.eps**2 - _CEIL_SLACK)
        count = 16 * self.candidate_count / self.delta
        return math.ceil(self.C * math.log(count) / self.eps - _CEIL_SLACK)

    def candidate_failure_bound(self) -> float:
        return 1 / self.r + 1 / self.s

    def to_dict(self) -> dict:
        return dict(eps=self.eps, candidate_count=self.candidate_count,
                    inner_divisor=self.inner_divisor, estimator=self.estimator,
                    C=self.C, delta=self.delta, r=self.r, s=self.s)


# -- pivot rule ---------------------------------------------------------------

def find_cluster(v: int, P, oracle: EdgeOracle) -> int:
    """First pivot positively adjacent to v, or v itself.

    Pivots are probed in order; reaching v inside P ends the scan without a
    probe.  At most ``len(P)`` probes.
    """
    P = np.asarray(P, dtype=np.int64)
    own = np.flatnonzero(P == v)
    scan = P[:own[0]] if own.size else P
    i = oracle.first_positive(v, scan)
    return int(scan[i]) if i >= 0 else int(v)


def find_cluster_many(vs, P, oracle: EdgeOracle) -> np.ndarray:
    """Vectorised :func:`find_cluster`; charges exactly the same probes."""
    vs = np.asarray(vs, dtype=np.int64)
    labels = vs.copy()
    open_ = np.ones(vs.size, dtype=bool)
    for p in np.asarray(P, dtype=np.int64):
        idx = np.flatnonzero(open_)
        if idx.size == 0:
            break
        own = vs[idx] == p
        open_[idx[own]] = False
        idx = idx[~own]
        if idx.size:
            hit = oracle.query_many(vs[idx], np.full(idx.size, p))
            labels[idx[hit]] = p
            open_[idx[hit]] = False
    return labels


def find_cluster_fn(P, oracle: EdgeOracle) -> Callable[[np.ndarray], np.ndarray]:
    P = np.asarray(P, dtype=np.int64)
    return lambda vs: find_cluster_many(vs, P, oracle)


def independent_set(Q, oracle: EdgeOracle) -> np.ndarray:
    """Greedy scan of Q: keep v when no kept vertex is a positive neighbour.

    Repeated entries of Q are ignored after their first occurrence.
    """
    P: list[int] = []
    seen = set()
    for v in np.asarray(Q, dtype=np.int64).tolist():
        if v in seen:
            continue
        seen.add(v)
        if oracle.first_positive(v, P) < 0:
            P.append(v)
    return np.asarray(P, dtype=np.int64)


def pivot_sample_size(eps: float, n: int) -> int:
    return min(n, math.ceil(1 / (2 * eps) - _CEIL_SLACK))


def _sample(n: int, eps: float, ctx: SeedContext, index: int) -> np.ndarray:
    size = pivot_sample_size(eps, n)
    return ctx.rng(f"sample:Q:{index}").permutation(n)[:size]


def find_pivots(eps: float, oracle: EdgeOracle, seed, index: int = 0) -> np.ndarray:
    """Independent set of a uniform sample (without replacement) of size min(n, 1/(2 eps))."""
    if not 0 < eps < 1:
        raise ValueError("eps must lie in (0, 1)")
    return independent_set(_sample(oracle.n, eps, as_seed(seed), index), oracle)


# -- preprocessing ------------------------------------------------------------

@dataclass
class PivotPlan:
    """Every random draw of the preprocessing stage, fixed before any probe."""

    samples: list
    estimate_pairs: list
    samples_per_candidate: int

    def vertex_set(self) -> np.ndarray:
        if not self.samples:
            return np.zeros(0, dtype=np.int64)
        return np.unique(np.concatenate(self.samples))


def pivot_plan(n: int, params: ApproxParams, seed) -> PivotPlan:
    ctx = as_seed(seed)
    m = params.estimate_samples()
    samples, pairs = [], []
    for i in range(params.candidate_count):
        samples.append(_sample(n, params.inner_eps, ctx, i))
        if n >= 2:
            pairs.append(sample_pairs(n, m, ctx.rng(f"estimate:{i}")))
        else:
            pairs.append((np.zeros(0, dtype=np.int64), np.zeros(0, dtype=np.int64)))
    return PivotPlan(samples, pairs, m)


def select_candidate(estimates) -> int:
    return int(np.argmin(estimates))


@dataclass(frozen=True)
class PivotHandle:
    """Result of the preprocessing stage; immutable and safe to share."""

    pivots: np.ndarray
    candidates: tuple = ()
    estimates: tuple = ()
    chosen: int = 0
    preprocessing_queries: int = 0
    params: ApproxParams | None = None
    seed: int | None = None

    def label(self, v: int, oracle: EdgeOracle) -> int:
        return find_cluster(v, self.pivots, oracle)

    def labels(self, oracle: EdgeOracle, vs=None) -> np.ndarray:
        vs = np.arange(oracle.n) if vs is None else vs
        return find_cluster_many(vs, self.pivots, oracle)

    def to_dict(self) -> dict:
        return dict(
            pivots=[int(p) for p in self.pivots],
            candidates=[[int(p) for p in c] for c in self.candidates],
            estimates=[float(e) for e in self.estimates],
            chosen=int(self.chosen),
            preprocessing_queries=int(self.preprocessing_queries),
            params=None if self.params is None else self.params.to_dict(),
            seed=self.seed,
        )

    @classmethod
    def from_dict(cls, d: dict) -> "PivotHandle":
        params = d.get("params")
        return cls(
            pivots=np.asarray(d["pivots"], dtype=np.int64),
            candidates=tuple(np.asarray(c, dtype=np.int64) for c in d.get("candidates", [])),
            estimates=tuple(d.get("estimates", [])),
            chosen=int(d.get("chosen", 0)),
            preprocessing_queries=int(d.get("preprocessing_queries", 0)),
            params=None if params is None else ApproxParams(**params),
            seed=d.get("seed"),
        )


def find_good_pivots(params: ApproxParams, oracle: EdgeOracle, seed) -> PivotHandle:
    """Best of ``candidate_count`` pivot sequences by estimated fractional cost.

    Candidate i scans sample ``sample:Q:i`` at accuracy ``eps/inner_divisor``
    and is scored on the pairs of stream ``estimate:i``; ties go to the lowest i.
    """
    if isinstance(params, (int, float)):
        params = ApproxParams(float(params))
    ctx = as_seed(seed)
    start = oracle.query_count
    m = params.estimate_samples()
    cands, est = [], []
    for i in range(params.candidate_count):
        P = find_pivots(params.inner_eps, oracle, ctx, index=i)
        cands.append(P)
        if oracle.n < 2:
            est.append(0.0)
        else:
            est.append(clustering_error(find_cluster_fn(P, oracle), oracle, m, ctx,
                                        tag=f"estimate:{i}"))
    j = select_candidate(est)
    return PivotHandle(cands[j], tuple(cands), tuple(est), j,
                       oracle.query_count - start, params, ctx.seed)


def _params(params) -> ApproxParams:
    return ApproxParams(float(params)) if isinstance(params, (int, float)) else params


def local_cluster(v: int, params, oracle: EdgeOracle, seed, handle: PivotHandle | None = None) -> int:
    """Cluster label of one vertex.

    Without ``handle`` the preprocessing is recomputed from the shared seed
    (pure local mode); with it only the pivot scan is paid.
    """
    if handle is None:
        handle = find_good_pivots(_params(params), oracle, seed)
    return find_cluster(v, handle.pivots, oracle)


def explicit_cluster(params, oracle: EdgeOracle, seed, return_handle: bool = False):
    """Label every vertex against one preprocessed pivot sequence."""
    handle = find_good_pivots(_params(params), oracle, seed)
    labels = find_cluster_many(np.arange(oracle.n), handle.pivots, oracle)
    return (labels, handle) if return_handle else labels


# -- boosting -----------------------------------------------------------------

@dataclass
class BoostResult:
    labels: np.ndarray
    chosen: int
    estimates: list
    samples_per_candidate: int
    runs: int


def boost_samples(eps: float, t: int) -> int:
    return math.ceil(math.log(6 * (t + 1)) / (2 * eps**2))


def boosted_cluster(paramsA, algB: Callable, r: float, oracle: EdgeOracle, seed,
                    q: int | None = None, return_details: bool = False):
    """Best of ``ceil(log2 r)`` pipeline runs and one run of ``algB``.

    ``algB(oracle, seed_context)`` returns a label array.  Each of the t+1
    candidates is scored on q fresh pairs; the lowest estimate wins.
    """
    if r <= 1:
        raise ValueError("r must exceed 1")
    paramsA = _params(paramsA)
    ctx = as_seed(seed)
    t = math.ceil(math.log2(r) - _CEIL_SLACK)
    q = boost_samples(paramsA.eps, t) if q is None else int(q)
    cands = [explicit_cluster(paramsA, oracle, ctx.child(f"boost:A:{i}")) for i in range(t)]
    cands.append(np.asarray(algB(oracle, ctx.child("boost:B")), dtype=np.int64))
    if oracle.n < 2:
        est = [0.0] * len(cands)
    else:
        est = [clustering_error(c, oracle, q, ctx, tag=f"boost:estimate:{i}")
               for i, c in enumerate(cands)]
    j = int(np.argmin(est))
    res = BoostResult(cands[j], j, est, q, t)
    return res if return_details else res.labels


# -- neighbourhood-oracle hybrid ------------------------------------------------

@dataclass
class HybridResult:
    labels: np.ndarray
    fallback: bool
    steps: int
    budget: int
    edge_queries: int


def hybrid_cluster(nbr: NeighborhoodOracle, seed, C: float = 4.0, return_details: bool = False):
    """Pivot clustering over neighbour lists, with a bounded step budget.

    Runs the random-order pivot process reading positive-neighbour lists,
    at most ``C * n**1.5`` steps.  If the budget runs out the explicit local
    pipeline with ``eps = n**-0.5`` takes over.
    """
    ctx = as_seed(seed)
    n = nbr.n
    budget = max(1, math.floor(C * n**1.5))
    start = nbr.steps
    order = ctx.rng("hybrid:perm").permutation(n)
    labels = np.full(n, -1, dtype=np.int64)
    done = True
    for v in order.tolist():
        if labels[v] >= 0:
            continue
        labels[v] = v
        pos = 0
        while True:
            left = budget - (nbr.steps - start)
            if left < 1:
                done = False
                break
            chunk = nbr.neighbors(v, start=pos, limit=left - 1)
            for w in chunk:
                if labels[w] < 0:
                    labels[w] = v
            pos += len(chunk)
            if len(chunk) < left - 1:
                break
        if not done:
            break
    steps = nbr.steps - start
    if done:
        res = HybridResult(labels, False, steps, budget, 0)
    else:
        oracle = nbr.edge_oracle()
        eps = min(n ** -0.5, 0.99)
        labels = explicit_cluster(ApproxParams(eps), oracle, ctx.child("hybrid:fallback"))
        res = HybridResult(labels, True, steps, budget, oracle.query_count)
    return res if return_details else res.labels


# -- analysis helpers ---------------------------------------------------------

def uncovered_edges(g: SignedGraph, P) -> int:
    """Positive edges with neither endpoint in ``P`` or a positive neighbour of ``P``."""
    P = np.asarray(P, dtype=np.int64)
    covered = np.zeros(g.n, dtype=bool)
    if P.size:
        covered[P] = True
        covered |= g.adjacency[P].any(axis=0)
    free = ~covered
    return int(np.triu(g.adjacency[np.ix_(free, free)], 1).sum())


@dataclass
class PivotProcessTrace:
    alpha: np.ndarray
    edges: np.ndarray
    pivots: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=np.int64))


def _actual_size(adj: np.ndarray) -> int:
    deg = adj.sum(axis=1)
    return int(deg.sum() + (deg > 0).sum())


def deletion_process(g: SignedGraph, steps: int, seed) -> PivotProcessTrace:
    """Edge-deletion process with pivots drawn uniformly (with replacement) from V.

    Each step removes every edge touching the pivot or its current positive
    neighbours.  ``alpha[i] = (2|E_i| + #non-isolated) / n**2``, i = 0..steps.
    """
    n = g.n
    adj = g.adjacency.copy()
    pivots = as_seed(seed).rng("deletion:pivots").integers(0, n, size=steps)
    alpha = np.empty(steps + 1)
    edges = np.empty(steps + 1, dtype=np.int64)
    alpha[0], edges[0] = _actual_size(adj) / n**2, adj.sum() // 2
    for i, v in enumerate(pivots, 1):
        hit = adj[v].copy()
        hit[v] = True
        adj[hit, :] = False
        adj[:, hit] = False
        alpha[i], edges[i] = _actual_size(adj) / n**2, adj.sum() // 2
    return PivotProcessTrace(alpha, edges, pivots)


def alpha_recurrence(a0: float, steps: int) -> np.ndarray:
    """Iterates of ``a -> a (1 - a)`` from a0, length steps + 1."""
    a = np.empty(steps + 1)
    a[0] = a0
    for i in range(steps):
        a[i + 1] = a[i] * (1 - a[i])
    return a
