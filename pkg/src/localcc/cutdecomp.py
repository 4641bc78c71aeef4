"""Cut decompositions of adjacency matrices.

Two constructions live here.  :func:`exact_cut_decomposition` is the greedy
exponential-time loop over all subset pairs of a small matrix.
:func:`fk_cut_decomposition` builds the decomposition implicitly from random
samples: every sample is drawn from the seed before any probe, the sampled
vertex set ``T`` is probed once as a ``T x T`` block, and membership of any
other vertex in ``R_i`` / ``S_i`` is decided later with a fixed number of
probes.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .graph import EdgeOracle, SignedGraph
from .seeding import as_seed

__all__ = [
    "CutStep",
    "CutDecomposition",
    "BlockStructure",
    "pre_partition",
    "subset_indicators",
    "exact_cut_decomposition",
    "FkPlan",
    "fk_plan",
    "fk_cut_decomposition",
    "memberships",
    "atom_of",
    "atom_labels",
    "materialize",
    "entry",
    "VerifyResult",
    "verify_relative_error",
    "frobenius_trace",
]

EXACT_LIMIT = 12
VERIFY_LIMIT = 10
MAX_COEF_LENGTH = 6.0
_NU_GAP = 1e-9


@dataclass
class CutStep:
    """One cut matrix ``CUT(R, S, d)``.

    Exact steps carry ``R`` and ``S`` as boolean masks.  Sampled steps carry
    what is needed to decide membership with probes: pivot column ``v``,
    threshold ``nu``, the row sample ``U`` (a multiset), the density sample
    ``Z`` and the sample-side facts fixed at construction time.
    """

    d: float
    R: np.ndarray | None = None
    S: np.ndarray | None = None
    v: int | None = None
    nu: float | None = None
    U: np.ndarray | None = None
    Z: tuple | None = None
    row_block: int = 0
    col_block: int = 0
    u_in_r: np.ndarray | None = None      # R_i(u) for each u in U
    u_prev: np.ndarray | None = None      # R_j(u) for j < i, shape (|U|, i)
    v_prev: np.ndarray | None = None      # S_j(v) for j < i
    attempt: int = 0

    @property
    def explicit(self) -> bool:
        return self.R is not None


@dataclass
class BlockStructure:
    """Equitable split of the vertex ids into ``t`` contiguous ranges."""

    n: int
    t: int
    bounds: np.ndarray

    def block(self, b: int) -> np.ndarray:
        return np.arange(self.bounds[b], self.bounds[b + 1])

    def block_of(self, xs) -> np.ndarray:
        return np.searchsorted(self.bounds, np.asarray(xs), side="right") - 1

    def max_size(self) -> int:
        return int(np.diff(self.bounds).max()) if self.t else 0


def pre_partition(oracle_or_n, t: int) -> BlockStructure:
    n = oracle_or_n if isinstance(oracle_or_n, (int, np.integer)) else oracle_or_n.n
    if t < 1:
        raise ValueError("block count must be at least 1")
    t = min(t, max(n, 1))
    sizes = [len(b) for b in np.array_split(np.arange(n), t)]
    return BlockStructure(n, t, np.concatenate([[0], np.cumsum(sizes)]).astype(np.int64))


@dataclass
class CutDecomposition:
    n: int
    steps: list = field(default_factory=list)
    kind: str = "exact"
    eps: float | None = None
    blocks: BlockStructure | None = None
    rejected_coef: int = 0
    attempts: int = 0
    probes: int = 0

    @property
    def width(self) -> int:
        return len(self.steps)

    @property
    def densities(self) -> np.ndarray:
        return np.array([s.d for s in self.steps], dtype=float)

    def coefficient_length(self) -> float:
        return float(np.sqrt((self.densities**2).sum()))

    def to_json(self) -> str:
        def arr(a):
            return None if a is None else np.asarray(a).astype(int if a.dtype != float else float).tolist()

        steps = []
        for s in self.steps:
            steps.append(dict(
                d=s.d, R=arr(s.R), S=arr(s.S), v=s.v, nu=s.nu, U=arr(s.U),
                Z=None if s.Z is None else [arr(s.Z[0]), arr(s.Z[1])],
                row_block=s.row_block, col_block=s.col_block, u_in_r=arr(s.u_in_r),
                u_prev=arr(s.u_prev), v_prev=arr(s.v_prev), attempt=s.attempt))
        return json.dumps(dict(
            n=self.n, kind=self.kind, eps=self.eps, width=self.width,
            blocks=None if self.blocks is None else self.blocks.t,
            rejected_coef=self.rejected_coef, attempts=self.attempts, probes=self.probes,
            steps=steps), sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "CutDecomposition":
        raw = json.loads(text)

        def arr(a, dtype):
            return None if a is None else np.asarray(a, dtype=dtype)

        steps = []
        for s in raw["steps"]:
            steps.append(CutStep(
                d=float(s["d"]), R=arr(s["R"], bool), S=arr(s["S"], bool), v=s["v"], nu=s["nu"],
                U=arr(s["U"], np.int64),
                Z=None if s["Z"] is None else (arr(s["Z"][0], np.int64), arr(s["Z"][1], np.int64)),
                row_block=s["row_block"], col_block=s["col_block"],
                u_in_r=arr(s["u_in_r"], bool),
                u_prev=arr(s["u_prev"], bool),
                v_prev=arr(s["v_prev"], bool), attempt=s["attempt"]))
        blocks = None if raw["blocks"] is None else pre_partition(raw["n"], raw["blocks"])
        return cls(raw["n"], steps, raw["kind"], raw["eps"], blocks,
                   raw["rejected_coef"], raw["attempts"], raw["probes"])


# -- exact greedy -------------------------------------------------------------

def subset_indicators(n: int) -> np.ndarray:
    """Row b is the 0/1 indicator of bitmask b (bit j = element j)."""
    return ((np.arange(1 << n)[:, None] >> np.arange(n)) & 1).astype(float)


def exact_cut_decomposition(A, eps: float, limit: int = EXACT_LIMIT,
                            max_width: int | None = None) -> CutDecomposition:
    """Greedy decomposition over all subset pairs of a small matrix.

    While some ``(R, S)`` has ``|W(R,S)| >= eps sqrt(|R||S|) sqrt(mn)``, take
    the one maximising ``W(R,S)^2 / (|R||S|)`` (lowest bitmasks on ties) and
    subtract ``CUT(R, S, W(R,S)/(|R||S|))``.  Each step lowers
    ``||W||_F^2`` by at least ``eps^2 mn``, so at most ``ceil(1/eps^2)`` steps.
    """
    if isinstance(A, SignedGraph):
        A = A.adjacency
    W = np.asarray(A, dtype=float).copy()
    m, n = W.shape
    if max(m, n) > limit:
        raise ValueError(f"exact decomposition limited to {limit} rows/columns (got {m}x{n})")
    if np.abs(W).max(initial=0) > 1:
        raise ValueError("matrix entries must lie in [-1, 1]")
    Ir, Ic = subset_indicators(m), subset_indicators(n)
    rs, cs = Ir.sum(1), Ic.sum(1)
    size = np.outer(rs, cs)
    need = eps * np.sqrt(size) * math.sqrt(m * n)
    with np.errstate(divide="ignore", invalid="ignore"):
        inv = np.where(size > 0, 1 / size, 0)
    cap = math.ceil(1 / eps**2 - 1e-9) if max_width is None else max_width
    steps = []
    while len(steps) < cap:
        G = Ir @ W @ Ic.T
        ok = (np.abs(G) >= need - 1e-9) & (size > 0)
        if not ok.any():
            break
        gain = np.where(ok, G * G * inv, -1.0)
        r, c = np.unravel_index(int(np.argmax(gain)), gain.shape)
        R, S = Ir[r].astype(bool), Ic[c].astype(bool)
        d = float(G[r, c] / size[r, c])
        W[np.ix_(R, S)] -= d
        steps.append(CutStep(d=d, R=R, S=S))
    return CutDecomposition(max(m, n), steps, "exact", eps)


def frobenius_trace(A, decomp: CutDecomposition) -> np.ndarray:
    """``||W_i||_F^2`` for i = 0..width on an explicit decomposition."""
    W = np.asarray(A.adjacency if isinstance(A, SignedGraph) else A, dtype=float).copy()
    out = [float((W**2).sum())]
    for s in decomp.steps:
        if not s.explicit:
            raise ValueError("frobenius_trace needs explicit steps; materialise first")
        W[np.ix_(s.R, s.S)] -= s.d
        out.append(float((W**2).sum()))
    return np.array(out)


# -- sampled construction -----------------------------------------------------

@dataclass
class _Slot:
    v: int
    nu: float
    U: np.ndarray
    zx: np.ndarray
    zy: np.ndarray


@dataclass
class FkPlan:
    """All random draws of a sampled construction, and the probed vertex set."""

    slots: dict
    T: np.ndarray
    sample_size: int
    retries: int
    max_width: int

    def probe_pairs(self) -> tuple[np.ndarray, np.ndarray]:
        u, w = np.meshgrid(self.T, self.T, indexing="ij")
        return u.ravel(), w.ravel()


def _draw_nu(rng) -> float:
    while True:
        nu = float(rng.uniform(-1.0, 1.0))
        if abs(nu) > _NU_GAP / 2:
            return nu


def _fk_sizes(eps, sample_size, max_sample, retries, max_width):
    if sample_size is None:
        sample_size = math.ceil(64 / eps**2 - 1e-9)
        if max_sample is not None:
            sample_size = min(sample_size, max_sample)
    if retries is None:
        retries = math.ceil(8 / eps - 1e-9)
    if max_width is None:
        max_width = math.ceil(1 / eps**2 - 1e-9)
    return int(sample_size), int(retries), int(max_width)


def fk_plan(n: int, eps: float, seed, max_width: int | None = None, blocks: int = 1,
            sample_size: int | None = None, max_sample: int | None = 4096,
            retries: int | None = None) -> FkPlan:
    """Pre-draw every slot ``(row block, col block, step, attempt)``.

    Slot draws use stream ``fk:a:b:i:r``; the union of every sampled vertex is
    the probe set ``T``.  Nothing here looks at the graph.
    """
    ss, retries, max_width = _fk_sizes(eps, sample_size, max_sample, retries, max_width)
    ctx = as_seed(seed)
    bs = pre_partition(n, blocks)
    slots = {}
    used = np.zeros(n, dtype=bool)
    for a in range(bs.t):
        rows = bs.block(a)
        for b in range(bs.t):
            cols = bs.block(b)
            if rows.size == 0 or cols.size == 0:
                continue
            for i in range(max_width):
                for r in range(retries):
                    rng = ctx.rng(f"fk:{a}:{b}:{i}:{r}")
                    v = int(cols[rng.integers(cols.size)])
                    nu = _draw_nu(rng)
                    U = rows[rng.integers(rows.size, size=ss)]
                    zx = rows[rng.integers(rows.size, size=ss)]
                    zy = cols[rng.integers(cols.size, size=ss)]
                    slots[(a, b, i, r)] = _Slot(v, nu, U, zx, zy)
                    used[v] = True
                    used[U] = True
                    used[zx] = True
                    used[zy] = True
    return FkPlan(slots, np.flatnonzero(used), ss, retries, max_width)


def fk_cut_decomposition(oracle: EdgeOracle, eps: float, delta: float = 0.1,
                         max_width: int | None = None, seed=None, blocks: int = 1,
                         sample_size: int | None = None, max_sample: int | None = 4096,
                         retries: int | None = None,
                         threshold: float | None = None) -> CutDecomposition:
    """Implicit sampled cut decomposition.

    Step i of block pair (a, b) tries up to ``retries`` pre-drawn slots.  A
    slot defines ``R = {x : W(x, v) nu >= nu^2}``,
    ``S = {y : W(U ∩ R, y) nu >= 0}`` and ``d`` = mean of ``W`` over the
    density sample inside ``R x S``.  It is accepted when the sampled
    ``|W(R, S)|`` is at least ``threshold * |rows||cols|`` (default
    ``eps^2 / 8``) and the coefficient length stays within 6.  The loop for a
    block pair stops at ``max_width`` or when every slot of a step fails.

    ``delta`` is the nominal failure probability; it is recorded only, since
    success is checked empirically by :func:`verify_relative_error`.
    """
    if not 0 < eps < 1 or not 0 < delta < 1:
        raise ValueError("eps and delta must lie in (0, 1)")
    n = oracle.n
    plan = fk_plan(n, eps, seed, max_width, blocks, sample_size, max_sample, retries)
    bs = pre_partition(n, blocks)
    thr = eps**2 / 8 if threshold is None else threshold
    start = oracle.query_count
    T = plan.T
    pos = np.full(n, -1, dtype=np.int64)
    pos[T] = np.arange(T.size)
    us, ws = plan.probe_pairs()
    AT = oracle.query_many(us, ws).reshape(T.size, T.size).astype(float) if T.size else np.zeros((0, 0))

    blk = bs.block_of(T) if T.size else np.zeros(0, dtype=np.int64)
    steps: list[CutStep] = []
    Rm = np.zeros((T.size, 0), dtype=bool)   # membership of T in every accepted R_j
    Sm = np.zeros((T.size, 0), dtype=bool)
    dens = np.zeros(0)
    sq = 0.0
    rejected = attempts = 0
    for a in range(bs.t):
        for b in range(bs.t):
            rows_n, cols_n = bs.bounds[a + 1] - bs.bounds[a], bs.bounds[b + 1] - bs.bounds[b]
            if rows_n == 0 or cols_n == 0:
                continue
            in_rows, in_cols = blk == a, blk == b
            for i in range(plan.max_width):
                taken = None
                for r in range(plan.retries):
                    sl = plan.slots[(a, b, i, r)]
                    attempts += 1
                    lv = pos[sl.v]
                    wcol = AT[:, lv] - (Rm * (dens * Sm[lv])).sum(axis=1)
                    inR = in_rows & (wcol * sl.nu >= sl.nu**2)
                    lu = pos[sl.U]
                    wts = np.bincount(lu, weights=inR[lu].astype(float), minlength=T.size)
                    # W(U∩R, y) = sum_u w_u A(u, y) - sum_j d_j S_j(y) sum_u w_u R_j(u)
                    score = wts @ AT - Sm @ (dens * (wts @ Rm)) if Rm.shape[1] else wts @ AT
                    inS = in_cols & (score * sl.nu >= 0)
                    lx, ly = pos[sl.zx], pos[sl.zy]
                    hit = inR[lx] & inS[ly]
                    if not hit.any():
                        continue
                    wz = AT[lx[hit], ly[hit]] - (Rm[lx[hit]] * Sm[ly[hit]] * dens).sum(axis=1)
                    d = float(wz.mean())
                    est = wz.sum() / sl.zx.size * rows_n * cols_n
                    if abs(est) < thr * rows_n * cols_n:
                        continue
                    if math.sqrt(sq + d * d) > MAX_COEF_LENGTH:
                        rejected += 1
                        continue
                    taken = CutStep(
                        d=d, v=sl.v, nu=sl.nu, U=sl.U.copy(), Z=(sl.zx.copy(), sl.zy.copy()),
                        row_block=a, col_block=b, u_in_r=inR[lu].copy(),
                        u_prev=Rm[lu].copy(), v_prev=Sm[lv].copy(), attempt=r)
                    break
                if taken is None:
                    break
                steps.append(taken)
                Rm = np.column_stack([Rm, inR])
                Sm = np.column_stack([Sm, inS])
                dens = np.append(dens, taken.d)
                sq += taken.d**2
    return CutDecomposition(n, steps, "fk", eps, bs if blocks > 1 else None,
                            rejected, attempts, oracle.query_count - start)


# -- evaluation ---------------------------------------------------------------

def memberships(decomp: CutDecomposition, xs, oracle: EdgeOracle | None = None):
    """Boolean arrays ``(R, S)`` of shape ``(len(xs), width)``.

    Explicit steps are read directly.  Sampled steps probe ``(x, v_i)`` when
    x lies in the step's row block and ``(u, x)`` for every element of the
    multiset ``U_i`` when x lies in its column block; nothing is cached.
    """
    xs = np.asarray(xs, dtype=np.int64)
    s = decomp.width
    R = np.zeros((xs.size, s), dtype=bool)
    S = np.zeros((xs.size, s), dtype=bool)
    bs = decomp.blocks
    blk = bs.block_of(xs) if bs is not None else np.zeros(xs.size, dtype=np.int64)
    for i, st in enumerate(decomp.steps):
        if st.explicit:
            R[:, i] = st.R[xs]
            S[:, i] = st.S[xs]
            continue
        if oracle is None:
            raise ValueError("sampled decompositions need an oracle to evaluate membership")
        dens = decomp.densities[:i]
        rows = np.flatnonzero(blk == st.row_block)
        if rows.size:
            a = oracle.query_many(xs[rows], np.full(rows.size, st.v)).astype(float)
            w = a - (R[rows, :i] * (dens * st.v_prev)).sum(axis=1)
            R[rows, i] = w * st.nu >= st.nu**2
        cols = np.flatnonzero(blk == st.col_block)
        if cols.size:
            uu, xx = np.meshgrid(st.U, xs[cols], indexing="ij")
            A = oracle.query_many(uu.ravel(), xx.ravel()).reshape(st.U.size, cols.size)
            wu = st.u_in_r.astype(float)
            score = wu @ A
            if i:
                score = score - S[cols, :i] @ (dens * (wu @ st.u_prev))
            S[cols, i] = score * st.nu >= 0
    return R, S


def atom_labels(decomp: CutDecomposition, xs, oracle: EdgeOracle | None = None) -> list[str]:
    R, S = memberships(decomp, xs, oracle)
    bits = np.empty((R.shape[0], 2 * R.shape[1]), dtype=np.uint8)
    bits[:, 0::2], bits[:, 1::2] = R, S
    return ["".join("1" if b else "0" for b in row) for row in bits]


def atom_of(x: int, decomp: CutDecomposition, oracle: EdgeOracle | None = None) -> str:
    """The 2s membership bits ``R_1 S_1 R_2 S_2 ...`` of vertex x."""
    return atom_labels(decomp, [x], oracle)[0]


def materialize(decomp: CutDecomposition, oracle: EdgeOracle | None = None) -> np.ndarray:
    """Dense ``B = sum_i d_i R_i S_i^T``."""
    R, S = memberships(decomp, np.arange(decomp.n), oracle)
    return (R * decomp.densities) @ S.T.astype(float)


def entry(decomp: CutDecomposition, x: int, y: int, oracle: EdgeOracle | None = None) -> float:
    R, _ = memberships(decomp, [x], oracle)
    _, S = memberships(decomp, [y], oracle)
    return float((R[0] * S[0] * decomp.densities).sum())


@dataclass
class VerifyResult:
    passed: bool
    worst_ratio: float
    witness_R: np.ndarray
    witness_S: np.ndarray
    gap: float

    def __bool__(self):
        return self.passed


def verify_relative_error(decomp: CutDecomposition, g: SignedGraph, eps: float,
                          B: np.ndarray | None = None, limit: int = VERIFY_LIMIT) -> VerifyResult:
    """Check ``|A(R,S) - B(R,S)| <= eps sqrt(|R||S|) n`` over every subset pair.

    ``worst_ratio`` is the largest ``|A(R,S) - B(R,S)| / (sqrt(|R||S|) n)``;
    the witness is the pair attaining it.
    """
    n = g.n
    if n > limit:
        raise ValueError(f"verification limited to n <= {limit} (got {n})")
    if B is None:
        B = materialize(decomp, g.oracle())
    M = g.adjacency.astype(float) - B
    I = subset_indicators(n)
    G = I @ M @ I.T
    sz = I.sum(1)
    norm = np.sqrt(np.outer(sz, sz)) * n
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.where(norm > 0, np.abs(G) / norm, 0.0)
    r, c = np.unravel_index(int(np.argmax(ratio)), ratio.shape)
    worst = float(ratio[r, c])
    return VerifyResult(worst <= eps + 1e-12, worst, I[r].astype(bool), I[c].astype(bool),
                        float(abs(G[r, c]) - eps * norm[r, c]))
