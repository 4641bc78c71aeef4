"""Edge streams, two semi-streaming drivers and a simulated two-round protocol.

All three draw the pivot samples and estimation pairs from the same seeded
streams as :func:`~localcc.pivot.find_good_pivots`, keep only the edges the
pipeline can ever probe, and replay the pipeline on what they kept.  Their
output is therefore the in-memory clustering for the same seed, exactly.
"""

from __future__ import annotations

import io
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Iterable, Iterator

import numpy as np

from .graph import EdgeOracle, GraphFormatError, SignedGraph, _lines, _read_header
from .pivot import (ApproxParams, PivotPlan, find_cluster_many, find_good_pivots,
                    find_pivots, pivot_plan)
from .seeding import as_seed

__all__ = [
    "EdgeStream",
    "parse_stream",
    "format_stream",
    "stream_from_graph",
    "RetainedOracle",
    "StreamStats",
    "stream_one_pass",
    "stream_two_pass",
    "ProcessorPartition",
    "DistributedTranscript",
    "simulate_distributed",
    "simple_cluster",
]


@dataclass
class EdgeStream:
    """Replayable sequence of ``(u, v, positive)`` events over n vertices."""

    n: int
    u: np.ndarray
    v: np.ndarray
    sign: np.ndarray

    def __len__(self):
        return int(self.u.size)

    def __iter__(self) -> Iterator[tuple[int, int, bool]]:
        return zip(self.u.tolist(), self.v.tolist(), self.sign.tolist())

    def permuted(self, seed) -> "EdgeStream":
        p = as_seed(seed).rng("stream:order").permutation(len(self))
        return EdgeStream(self.n, self.u[p], self.v[p], self.sign[p])

    def to_graph(self) -> SignedGraph:
        return SignedGraph.from_edges(self.n, zip(self.u[self.sign].tolist(), self.v[self.sign].tolist()))


def parse_stream(text) -> EdgeStream:
    """Header ``n <N>`` then ``u v`` (positive) or ``u v +`` / ``u v -`` events."""
    lines = _lines(text)
    n = _read_header(lines)
    us, vs, ss = [], [], []
    for lineno, fields in lines:
        if len(fields) not in (2, 3):
            raise GraphFormatError(f"line {lineno}: expected 'u v' or 'u v +|-'")
        try:
            u, v = int(fields[0]), int(fields[1])
        except ValueError:
            raise GraphFormatError(f"line {lineno}: vertex ids must be integers") from None
        if not (0 <= u < n and 0 <= v < n) or u == v:
            raise GraphFormatError(f"line {lineno}: bad pair ({u}, {v}) for n={n}")
        sign = True
        if len(fields) == 3:
            if fields[2] not in ("+", "-"):
                raise GraphFormatError(f"line {lineno}: sign must be '+' or '-'")
            sign = fields[2] == "+"
        us.append(u)
        vs.append(v)
        ss.append(sign)
    return EdgeStream(n, np.array(us, dtype=np.int64), np.array(vs, dtype=np.int64),
                      np.array(ss, dtype=bool))


def format_stream(s: EdgeStream) -> str:
    out = io.StringIO()
    out.write(f"n {s.n}\n")
    for u, v, sg in s:
        out.write(f"{u} {v}\n" if sg else f"{u} {v} -\n")
    return out.getvalue()


def stream_from_graph(g: SignedGraph, seed=None, negatives: bool = False) -> EdgeStream:
    """Positive edges of g (and optionally explicit negatives), seed-shuffled."""
    iu, ju = np.triu_indices(g.n, 1)
    sign = g.adjacency[iu, ju]
    keep = np.ones(iu.size, dtype=bool) if negatives else sign
    s = EdgeStream(g.n, iu[keep], ju[keep], sign[keep])
    return s if seed is None else s.permuted(seed)


# -- retained storage ---------------------------------------------------------

class RetainedOracle(EdgeOracle):
    """Oracle answering only from retained stream data.

    ``rows`` x ``cols`` is kept as a dense block (either orientation answers);
    isolated pairs are kept in a sorted key list.  Asking for anything else is
    an error, which is how the drivers prove they kept enough.
    """

    def __init__(self, n: int, rows, cols, block, pair_keys=None, pair_sign=None):
        self.rows = np.asarray(rows, dtype=np.int64)
        self.cols = np.asarray(cols, dtype=np.int64)
        self.block = np.asarray(block, dtype=bool)
        self.rpos = np.full(n, -1, dtype=np.int64)
        self.rpos[self.rows] = np.arange(self.rows.size)
        self.cpos = np.full(n, -1, dtype=np.int64)
        self.cpos[self.cols] = np.arange(self.cols.size)
        keys = np.zeros(0, dtype=np.int64) if pair_keys is None else np.asarray(pair_keys, dtype=np.int64)
        order = np.argsort(keys, kind="stable")
        self.keys = keys[order]
        self.key_sign = np.zeros(0, dtype=bool) if pair_sign is None else np.asarray(pair_sign, dtype=bool)[order]
        super().__init__(self._answer, n=n)

    def _answer(self, us, vs):
        us, vs = np.asarray(us, dtype=np.int64).ravel(), np.asarray(vs, dtype=np.int64).ravel()
        out = np.zeros(us.size, dtype=bool)
        known = np.zeros(us.size, dtype=bool) | (us == vs)
        a = (self.rpos[us] >= 0) & (self.cpos[vs] >= 0)
        out[a] = self.block[self.rpos[us[a]], self.cpos[vs[a]]]
        known |= a
        b = ~known & (self.rpos[vs] >= 0) & (self.cpos[us] >= 0)
        out[b] = self.block[self.rpos[vs[b]], self.cpos[us[b]]]
        known |= b
        rest = np.flatnonzero(~known)
        if rest.size:
            k = pair_key(us[rest], vs[rest], self.n)
            i = np.searchsorted(self.keys, k)
            ok = (i < self.keys.size) & (self.keys[np.minimum(i, self.keys.size - 1)] == k) if self.keys.size else np.zeros(rest.size, dtype=bool)
            if not ok.all():
                bad = rest[~ok][0]
                raise KeyError(f"pair ({us[bad]}, {vs[bad]}) was not retained")
            out[rest] = self.key_sign[i]
        return out


def pair_key(us, vs, n: int) -> np.ndarray:
    us, vs = np.asarray(us, dtype=np.int64), np.asarray(vs, dtype=np.int64)
    return np.minimum(us, vs) * n + np.maximum(us, vs)


@dataclass
class StreamStats:
    """Memory counters of a streaming run.

    ``memory`` adds retained positive edges (one pass), dense block cells
    (two passes), retained estimation pairs and per-vertex integers.
    """

    events: int = 0
    retained_edges: int = 0
    retained_pairs: int = 0
    block_cells: int = 0
    pass2_integers: int = 0
    passes: int = 1
    bound: int = 0
    extra: dict = field(default_factory=dict)

    @property
    def memory(self) -> int:
        return self.retained_edges + self.block_cells + self.retained_pairs + self.pass2_integers

    def to_dict(self) -> dict:
        return dict(events=self.events, retained_edges=self.retained_edges,
                    retained_pairs=self.retained_pairs, block_cells=self.block_cells,
                    pass2_integers=self.pass2_integers, passes=self.passes,
                    memory=self.memory, bound=self.bound, **self.extra)

    def within_bound(self) -> bool:
        return self.memory <= self.bound


class _Collector:
    """Keeps positive events of a block ``rows x cols`` plus listed isolated pairs."""

    def __init__(self, n: int, rows, cols, wanted_keys):
        self.n = n
        self.rows = np.asarray(rows, dtype=np.int64)
        self.cols = np.asarray(cols, dtype=np.int64)
        self.in_rows = np.zeros(n, dtype=bool)
        self.in_rows[self.rows] = True
        self.in_cols = np.zeros(n, dtype=bool)
        self.in_cols[self.cols] = True
        self.rpos = np.full(n, -1, dtype=np.int64)
        self.rpos[self.rows] = np.arange(self.rows.size)
        self.cpos = np.full(n, -1, dtype=np.int64)
        self.cpos[self.cols] = np.arange(self.cols.size)
        self.block = np.zeros((self.rows.size, self.cols.size), dtype=bool)
        self.wanted = set(np.unique(wanted_keys).tolist())
        self.got: dict[int, bool] = {}
        self.block_edges = 0
        self.seen_negative: set[int] = set()
        self.events = 0

    def feed(self, u: int, v: int, sign: bool):
        self.events += 1
        hit = False
        for a, b in ((u, v), (v, u)):
            if self.in_rows[a] and self.in_cols[b]:
                hit = True
                cell = self.block[self.rpos[a], self.cpos[b]]
                if cell and sign:
                    raise GraphFormatError(f"pair ({u}, {v}) repeated in stream")
                if sign:
                    self.block[self.rpos[a], self.cpos[b]] = True
        key = min(u, v) * self.n + max(u, v)
        if hit and sign and key in self.seen_negative:
            raise GraphFormatError(f"pair ({u}, {v}) reported with both signs")
        if hit:
            if sign:
                self.block_edges += 1
            elif key in self.seen_negative:
                raise GraphFormatError(f"pair ({u}, {v}) repeated in stream")
            else:
                self.seen_negative.add(key)
        if key in self.wanted:
            if key in self.got:
                raise GraphFormatError(f"pair ({u}, {v}) repeated in stream")
            self.got[key] = sign
        if hit and not sign:
            self._check_negative(u, v)

    def _check_negative(self, u, v):
        for a, b in ((u, v), (v, u)):
            if self.in_rows[a] and self.in_cols[b] and self.block[self.rpos[a], self.cpos[b]]:
                raise GraphFormatError(f"pair ({u}, {v}) reported with both signs")

    def oracle(self) -> RetainedOracle:
        keys = np.array(sorted(self.wanted), dtype=np.int64)
        sign = np.array([self.got.get(k, False) for k in keys.tolist()], dtype=bool)
        return RetainedOracle(self.n, self.rows, self.cols, self.block, keys, sign)


def _stream_n(stream) -> int:
    n = getattr(stream, "n", None)
    if n is None:
        raise ValueError("stream must declare n up front")
    return int(n)


def _params(eps, params):
    if params is not None:
        return params.with_eps(eps) if eps is not None else params
    return ApproxParams(float(eps))


def _estimate_keys(plan: PivotPlan, n: int) -> np.ndarray:
    if not plan.estimate_pairs:
        return np.zeros(0, dtype=np.int64)
    return np.concatenate([pair_key(u, w, n) for u, w in plan.estimate_pairs])


def _estimate_endpoints(plan: PivotPlan) -> np.ndarray:
    if not plan.estimate_pairs:
        return np.zeros(0, dtype=np.int64)
    return np.unique(np.concatenate([np.concatenate([u, w]) for u, w in plan.estimate_pairs]))


def simple_cluster(params, oracle: EdgeOracle, seed) -> np.ndarray:
    """Single sample, no candidate selection: label by the greedy independent set."""
    if isinstance(params, (int, float)):
        params = ApproxParams(float(params))
    P = find_pivots(params.inner_eps, oracle, seed, index=0)
    return find_cluster_many(np.arange(oracle.n), P, oracle)


def stream_one_pass(stream, eps: float | None = None, seed=None, params: ApproxParams | None = None,
                    simple: bool = False, return_stats: bool = False):
    """One pass: keep every positive edge touching the sample, plus estimation pairs."""
    n = _stream_n(stream)
    params = _params(eps, params)
    ctx = as_seed(seed)
    plan = pivot_plan(n, params, ctx)
    if simple:
        S = np.sort(plan.samples[0])
        keys = np.zeros(0, dtype=np.int64)
    else:
        S = plan.vertex_set()
        keys = _estimate_keys(plan, n)
    col = _Collector(n, S, np.arange(n), keys)
    for u, v, sg in stream:
        col.feed(u, v, sg)
    oracle = col.oracle()
    if simple:
        labels = simple_cluster(params, oracle, ctx)
    else:
        handle = find_good_pivots(params, oracle, ctx)
        labels = find_cluster_many(np.arange(n), handle.pivots, oracle)
    stats = StreamStats(events=col.events, retained_edges=col.block_edges,
                        retained_pairs=len(col.wanted), passes=1)
    stats.bound = n * S.size + len(col.wanted)
    stats.extra = dict(sample_vertices=int(S.size), probes_replayed=oracle.query_count)
    return (labels, stats) if return_stats else labels


def stream_two_pass(source, eps: float | None = None, seed=None, params: ApproxParams | None = None,
                    simple: bool = False, return_stats: bool = False):
    """Two passes with O(|S|^2 + estimation data + n) memory.

    Pass 1 keeps the sample-induced block, the edges between estimation
    endpoints and the sample, and the estimation pairs; the pivot sequence is
    fixed from these.  Pass 2 keeps, per vertex, the smallest pivot index
    among its positive neighbours.
    """
    if callable(source) and not isinstance(source, EdgeStream):
        replay: Callable[[], Iterable] = source
        first = replay()
        n = _stream_n(first)
    else:
        n = _stream_n(source)
        if isinstance(source, Iterator):
            raise ValueError("two-pass clustering needs a replayable source")
        replay = lambda: source  # noqa: E731
        first = source
    params = _params(eps, params)
    ctx = as_seed(seed)
    plan = pivot_plan(n, params, ctx)
    if simple:
        S = np.sort(plan.samples[0])
        rows, keys = S, np.zeros(0, dtype=np.int64)
    else:
        S = plan.vertex_set()
        rows = np.union1d(S, _estimate_endpoints(plan))
        keys = _estimate_keys(plan, n)
    col = _Collector(n, rows, S, keys)
    for u, v, sg in first:
        col.feed(u, v, sg)
    oracle = col.oracle()
    if simple:
        P = find_pivots(params.inner_eps, oracle, ctx, index=0)
    else:
        P = find_good_pivots(params, oracle, ctx).pivots
    idx = np.full(n, -1, dtype=np.int64)
    idx[P] = np.arange(P.size)
    best = np.full(n, P.size, dtype=np.int64)
    events2 = 0
    for u, v, sg in replay():
        events2 += 1
        if not sg:
            continue
        if idx[v] >= 0 and idx[v] < best[u]:
            best[u] = idx[v]
        if idx[u] >= 0 and idx[u] < best[v]:
            best[v] = idx[u]
    labels = np.arange(n, dtype=np.int64)
    has = best < P.size
    labels[has] = P[best[has]]
    labels[P] = P
    stats = StreamStats(events=col.events + events2,
                        retained_pairs=len(col.wanted), block_cells=int(rows.size * S.size),
                        pass2_integers=n, passes=2)
    stats.bound = S.size**2 + (rows.size - np.intersect1d(rows, S).size) * S.size + len(col.wanted) + n
    stats.extra = dict(sample_vertices=int(S.size), estimation_endpoints=int(rows.size - S.size))
    return (labels, stats) if return_stats else labels


# -- distributed simulation -----------------------------------------------------

@dataclass
class ProcessorPartition:
    """Every unordered pair, with its sign, owned by exactly one processor."""

    n: int
    owner_u: list
    owner_v: list
    owner_sign: list

    @property
    def processors(self) -> int:
        return len(self.owner_u)

    @classmethod
    def from_graph(cls, g: SignedGraph, processors: int, seed=None) -> "ProcessorPartition":
        iu, ju = np.triu_indices(g.n, 1)
        sign = g.adjacency[iu, ju]
        if seed is None:
            who = np.arange(iu.size) % processors
        else:
            who = as_seed(seed).rng("partition").integers(0, processors, size=iu.size)
        return cls(g.n, [iu[who == p] for p in range(processors)],
                   [ju[who == p] for p in range(processors)],
                   [sign[who == p] for p in range(processors)])

    def validate(self):
        n = self.n
        keys = np.concatenate([pair_key(u, v, n) for u, v in zip(self.owner_u, self.owner_v)]) \
            if self.owner_u else np.zeros(0, dtype=np.int64)
        for u, v in zip(self.owner_u, self.owner_v):
            if (np.asarray(u) == np.asarray(v)).any():
                raise ValueError("partition contains a self-pair")
        total = n * (n - 1) // 2
        uniq = np.unique(keys)
        if uniq.size != keys.size:
            raise ValueError("partition assigns some pair to two processors")
        if uniq.size != total:
            raise ValueError(f"partition covers {uniq.size} of {total} pairs")


@dataclass
class DistributedTranscript:
    messages: list = field(default_factory=list)      # per round, per processor
    memory: list = field(default_factory=list)        # per processor high-water mark
    coordinator_memory: int = 0
    pivots: list = field(default_factory=list)

    @property
    def total_messages(self) -> int:
        return int(sum(sum(r) for r in self.messages))

    def to_dict(self) -> dict:
        return dict(messages=self.messages, memory=self.memory,
                    coordinator_memory=self.coordinator_memory,
                    total_messages=self.total_messages, pivots=self.pivots)


def simulate_distributed(partition: ProcessorPartition, eps: float | None = None, seed=None,
                         params: ApproxParams | None = None, simple: bool = False,
                         workers: int = 1):
    """Two rounds of in-process message passing.

    Round 1: every processor reports its positive pairs inside the pivot
    block (sample x sample, estimation endpoints x sample) and the signs of
    its estimation pairs; the coordinator fixes the pivot sequence.  Round 2:
    every processor reports, for each positive pair touching a pivot, the
    pivot index offered to the other endpoint; the coordinator keeps the
    minimum per vertex.  Reports are sorted before use, so the result does
    not depend on processor scheduling.
    """
    partition.validate()
    n = partition.n
    params = _params(eps, params)
    ctx = as_seed(seed)
    plan = pivot_plan(n, params, ctx)
    if simple:
        S = np.sort(plan.samples[0])
        rows, keys = S, np.zeros(0, dtype=np.int64)
    else:
        S = plan.vertex_set()
        rows = np.union1d(S, _estimate_endpoints(plan))
        keys = np.unique(_estimate_keys(plan, n))
    in_rows = np.zeros(n, dtype=bool)
    in_rows[rows] = True
    in_s = np.zeros(n, dtype=bool)
    in_s[S] = True
    tr = DistributedTranscript()

    def round1(p):
        u, v, sg = partition.owner_u[p], partition.owner_v[p], partition.owner_sign[p]
        blk = sg & ((in_rows[u] & in_s[v]) | (in_rows[v] & in_s[u]))
        k = pair_key(u, v, n)
        est = np.isin(k, keys)
        return (u[blk], v[blk]), (k[est], sg[est])

    def run(fn):
        if workers > 1:
            with ThreadPoolExecutor(workers) as ex:
                return list(ex.map(fn, range(partition.processors)))
        return [fn(p) for p in range(partition.processors)]

    r1 = run(round1)
    bu = np.concatenate([r[0][0] for r in r1]) if r1 else np.zeros(0, dtype=np.int64)
    bv = np.concatenate([r[0][1] for r in r1]) if r1 else np.zeros(0, dtype=np.int64)
    ek = np.concatenate([r[1][0] for r in r1]) if r1 else np.zeros(0, dtype=np.int64)
    es = np.concatenate([r[1][1] for r in r1]) if r1 else np.zeros(0, dtype=bool)
    order = np.lexsort((bv, bu))
    bu, bv = bu[order], bv[order]
    order = np.argsort(ek, kind="stable")
    ek, es = ek[order], es[order]
    tr.messages.append([int(r[0][0].size + r[1][0].size) for r in r1])
    rpos = np.full(n, -1, dtype=np.int64)
    rpos[rows] = np.arange(rows.size)
    cpos = np.full(n, -1, dtype=np.int64)
    cpos[S] = np.arange(S.size)
    block = np.zeros((rows.size, S.size), dtype=bool)
    for a, b in ((bu, bv), (bv, bu)):
        m = (rpos[a] >= 0) & (cpos[b] >= 0)
        block[rpos[a[m]], cpos[b[m]]] = True
    oracle = RetainedOracle(n, rows, S, block, ek, es)
    if simple:
        P = find_pivots(params.inner_eps, oracle, ctx, index=0)
    else:
        P = find_good_pivots(params, oracle, ctx).pivots
    tr.pivots = [int(x) for x in P]
    idx = np.full(n, -1, dtype=np.int64)
    idx[P] = np.arange(P.size)

    def round2(p):
        u, v, sg = partition.owner_u[p], partition.owner_v[p], partition.owner_sign[p]
        out_v, out_i = [], []
        for a, b in ((u, v), (v, u)):
            m = sg & (idx[b] >= 0)
            out_v.append(a[m])
            out_i.append(idx[b[m]])
        return np.concatenate(out_v), np.concatenate(out_i)

    r2 = run(round2)
    tr.messages.append([int(r[0].size) for r in r2])
    best = np.full(n, P.size, dtype=np.int64)
    for vv, ii in r2:
        np.minimum.at(best, vv, ii)
    labels = np.arange(n, dtype=np.int64)
    has = best < P.size
    labels[has] = P[best[has]]
    labels[P] = P
    tr.memory = [int(partition.owner_u[p].size) for p in range(partition.processors)]
    tr.coordinator_memory = int(block.size + ek.size + n)
    return labels, tr
