"""Additive approximation through atom-respecting clusterings.

The atoms of a cut decomposition are the Venn cells of its sets ``R_i`` and
``S_i``.  The optimum over clusterings that keep each atom whole is within
``eps n^2`` of the unrestricted optimum (for a fine enough decomposition), and
a vertex only needs its own atom and the atom-to-cluster map to be labelled.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .clustering import as_labels, canonical_labels
from .cutdecomp import (CutDecomposition, atom_labels, exact_cut_decomposition,
                        fk_cut_decomposition)
from .estimation import sample_pairs
from .graph import EdgeOracle, SignedGraph
from .seeding import as_seed

__all__ = [
    "choose_k",
    "TiledDecomposition",
    "build_tiled",
    "tiled_from_partition",
    "ideal_cost",
    "diagonal_terms",
    "AssignmentCostModel",
    "assignment_count",
    "restricted_growth_strings",
    "best_assignment",
    "sampled_pair_count",
    "PtasHandle",
    "ptas_preprocess",
    "ptas_local_cluster",
    "ptas_explicit",
    "EnumerationBudgetExceeded",
]

MAX_ATOMS = 256
ENUMERATION_BUDGET = 10**7
DEFAULT_MAX_WIDTH = 4
EXACT_DECOMP_LIMIT = 12


class EnumerationBudgetExceeded(RuntimeError):
    pass


def choose_k(eps: float) -> int:
    """Number of clusters that suffices for an additive eps approximation."""
    if not 0 < eps <= 1:
        raise ValueError("eps must lie in (0, 1]")
    return math.ceil(1 + 2 / eps - 1e-9)


# -- tiled form ---------------------------------------------------------------

@dataclass
class TiledDecomposition:
    """Atoms of a decomposition with their pairwise densities.

    ``E[t, u]`` is the ordered adjacency sum ``A(V^t, V^u)`` (so the diagonal
    counts each internal edge twice).  Off the diagonal the density is
    ``E / (|V^t||V^u|)``; on it ``E / (|V^t|(|V^t|-1))``, zero for singletons.
    """

    n: int
    atom: np.ndarray                  # atom index of every vertex
    labels: list                      # bit string per atom
    sizes: np.ndarray
    E: np.ndarray
    size_bound: float | None = None
    sampled: bool = False

    @property
    def num_atoms(self) -> int:
        return len(self.labels)

    @property
    def density(self) -> np.ndarray:
        sz = self.sizes.astype(float)
        denom = np.outer(sz, sz)
        np.fill_diagonal(denom, sz * (sz - 1))
        with np.errstate(divide="ignore", invalid="ignore"):
            return np.where(denom > 0, self.E / denom, 0.0)

    @property
    def size_bound_violated(self) -> bool:
        return self.size_bound is not None and bool((self.sizes > self.size_bound).any())

    def pair_counts(self) -> tuple[np.ndarray, np.ndarray]:
        """Positive and negative unordered-pair counts per atom pair (upper triangle)."""
        sz = self.sizes.astype(np.int64)
        pairs = np.outer(sz, sz)
        np.fill_diagonal(pairs, sz * (sz - 1) // 2)
        pos = self.E.astype(np.int64).copy()
        np.fill_diagonal(pos, np.diag(pos) // 2)
        return np.triu(pos), np.triu(pairs - pos)


def _atoms_from_labels(labs: list[str]):
    index: dict[str, int] = {}
    atom = np.empty(len(labs), dtype=np.int64)
    for x, lab in enumerate(labs):
        atom[x] = index.setdefault(lab, len(index))
    return atom, list(index)


def build_tiled(decomp: CutDecomposition, g: SignedGraph, oracle: EdgeOracle | None = None,
                k: int | None = None, eps: float | None = None,
                max_atoms: int = MAX_ATOMS) -> TiledDecomposition:
    """Exact atom-pair densities of ``g`` for the atoms of ``decomp``.

    Atoms are numbered by their smallest vertex.  When ``k`` and ``eps`` are
    given the size bound ``eps n / (8k)`` is recorded and flagged if broken.
    """
    labs = atom_labels(decomp, np.arange(g.n), oracle if oracle is not None else g.oracle())
    atom, names = _atoms_from_labels(labs)
    if len(names) > max_atoms:
        raise EnumerationBudgetExceeded(f"{len(names)} atoms exceed the limit {max_atoms}")
    return tiled_from_partition(g, atom, names, k, eps)


def tiled_from_partition(g: SignedGraph, atom, names=None, k=None, eps=None) -> TiledDecomposition:
    atom = np.asarray(atom, dtype=np.int64)
    ell = int(atom.max()) + 1 if atom.size else 0
    M = np.zeros((g.n, ell))
    M[np.arange(g.n), atom] = 1
    E = M.T @ g.adjacency.astype(float) @ M
    sizes = np.bincount(atom, minlength=ell)
    bound = None if k is None or eps is None else eps * g.n / (8 * k)
    names = [str(t) for t in range(ell)] if names is None else names
    return TiledDecomposition(g.n, atom, names, sizes, np.rint(E), bound)


def _alpha(tiled: TiledDecomposition, X) -> np.ndarray:
    """alpha[j, t] = |X_j ∩ V^t| for a clustering or an atom assignment."""
    X = np.asarray(X, dtype=np.int64)
    if X.size == tiled.num_atoms and X.size != tiled.n:
        X = X[tiled.atom]
    X = canonical_labels(as_labels(X, tiled.n))
    a = np.zeros((int(X.max()) + 1 if X.size else 0, tiled.num_atoms))
    np.add.at(a, (X, tiled.atom), 1)
    return a


def ideal_cost(tiled: TiledDecomposition, X, k: int | None = None) -> float:
    """Idealised cost of clustering X under the tiled cut matrices.

    ``-n/2 + sum_j sum_{t,u} (1-d)/2 a_jt a_ju + sum_{j<j'} sum_{t,u} d a_jt a_j'u``.
    X is a vertex labelling or, when its length is the atom count, a map
    from atoms to clusters.
    """
    a = _alpha(tiled, X)
    if k is not None and a.shape[0] > k:
        raise ValueError(f"clustering has {a.shape[0]} clusters, more than k={k}")
    D = tiled.density
    intra = np.einsum("jt,tu,ju->", a, (1 - D) / 2, a)
    tot = a.sum(0)
    cross = (tot @ D @ tot - np.einsum("jt,tu,ju->", a, D, a)) / 2
    return float(-tiled.n / 2 + intra + cross)


def diagonal_terms(tiled: TiledDecomposition, X) -> float:
    """Contribution of the ``t = u`` cut matrices to :func:`ideal_cost`."""
    a = _alpha(tiled, X)
    dd = np.diag(tiled.density)
    tot = a.sum(0)
    intra = ((1 - dd) / 2 * (a**2).sum(0)).sum()
    cross = (dd * (tot**2 - (a**2).sum(0))).sum() / 2
    return float(intra + cross)


@dataclass
class AssignmentCostModel:
    """Quadratic objective over allocations ``alpha[j, t]`` with the diagonal removed.

    ``lam_same[t, u] = (1 - d)/2`` and ``lam_cross[t, u] = d``; the cross part is
    summed over unordered cluster pairs.  Both vanish for ``t = u``.
    """

    n: int
    lam_same: np.ndarray
    lam_cross: np.ndarray
    sizes: np.ndarray

    @classmethod
    def from_tiled(cls, tiled: TiledDecomposition) -> "AssignmentCostModel":
        D = tiled.density
        same, cross = (1 - D) / 2, D.copy()
        np.fill_diagonal(same, 0)
        np.fill_diagonal(cross, 0)
        return cls(tiled.n, same, cross, tiled.sizes.copy())

    def kappa(self, j: int, jj: int) -> np.ndarray:
        return self.lam_same if j == jj else self.lam_cross / 2

    def objective(self, alpha) -> float:
        a = np.asarray(alpha, dtype=float)
        intra = np.einsum("jt,tu,ju->", a, self.lam_same, a)
        tot = a.sum(0)
        cross = (tot @ self.lam_cross @ tot - np.einsum("jt,tu,ju->", a, self.lam_cross, a)) / 2
        return float(-self.n / 2 + intra + cross)

    def free_atom_coefficients(self, alpha, t: int) -> np.ndarray:
        """Per-cluster linear coefficients of atom t's allocation, others fixed."""
        a = np.asarray(alpha, dtype=float).copy()
        a[:, t] = 0
        same = a @ (self.lam_same[t] + self.lam_same[:, t])
        tot = a.sum(0)
        other = (tot @ (self.lam_cross[t] + self.lam_cross[:, t])) - a @ (self.lam_cross[t] + self.lam_cross[:, t])
        return same + other / 2


# -- assignment search ----------------------------------------------------------

def assignment_count(ell: int, k: int) -> int:
    """Number of set partitions of ``ell`` atoms into at most k blocks."""
    if ell == 0:
        return 1
    row = [1] + [0] * k                  # Stirling numbers S(i, j), j <= k
    for _ in range(ell):
        new = [0] * (k + 1)
        for j in range(1, k + 1):
            new[j] = j * row[j] + row[j - 1]
        row = new
    return sum(row)


def restricted_growth_strings(ell: int, k: int) -> np.ndarray:
    """All maps atoms -> [k] that name clusters in order of first use, lex order.

    Each is the lexicographically least member of its relabelling class, so
    the first minimiser among them is the least minimiser over all ``k**ell``.
    """
    if ell == 0:
        return np.zeros((1, 0), dtype=np.int8)
    cur = np.zeros((1, 1), dtype=np.int8)
    top = np.zeros(1, dtype=np.int8)
    for _ in range(1, ell):
        nxt = np.minimum(top + 1, k - 1)
        reps = nxt.astype(np.int64) + 1
        par = np.repeat(np.arange(cur.shape[0]), reps)
        val = (np.arange(reps.sum()) - np.repeat(np.cumsum(reps) - reps, reps)).astype(np.int8)
        cur = np.column_stack([cur[par], val])
        top = np.maximum(top[par], val)
    return cur


def _score_assignments(G: np.ndarray, pos: np.ndarray, neg: np.ndarray, chunk: int = 1 << 18):
    """Disagreement totals for each row of G given upper-triangular pair counts."""
    ell = G.shape[1]
    iu, ju = np.triu_indices(ell, 1)
    base = float(np.trace(neg) + pos[iu, ju].sum())
    delta = (neg - pos)[iu, ju].astype(float)
    out = np.empty(G.shape[0])
    for s in range(0, G.shape[0], chunk):
        blk = G[s:s + chunk]
        out[s:s + chunk] = base + (blk[:, iu] == blk[:, ju]) @ delta
    return out


@dataclass
class AssignmentResult:
    assignment: np.ndarray
    score: float
    candidates: int
    mode: str
    samples: int = 0


def sampled_pair_count(eps: float, k: int, ell: int) -> int:
    return math.ceil((math.log(2 * 6) + ell * math.log(k)) / (2 * (eps / 4) ** 2))


def best_assignment(tiled: TiledDecomposition | None, k: int, eps: float | None = None,
                    mode: str = "exact", seed=None, pair_counts=None,
                    budget: int = ENUMERATION_BUDGET) -> AssignmentResult:
    """Atom -> cluster map of least cost; ties go to the lexicographically least map.

    ``exact`` scores each map by its true cost from the atom-pair counts of
    ``tiled``.  ``sampled`` scores it on ``pair_counts = (pos, neg)`` gathered
    from sampled vertex pairs (see :func:`ptas_preprocess`).
    """
    if mode == "exact":
        pos, neg = tiled.pair_counts()
        ell = tiled.num_atoms
    elif mode == "sampled":
        if pair_counts is None:
            raise ValueError("sampled mode needs pair counts")
        pos, neg = pair_counts
        ell = pos.shape[0]
    else:
        raise ValueError(f"unknown mode {mode!r}")
    count = assignment_count(ell, k)
    if count > budget:
        raise EnumerationBudgetExceeded(
            f"{count} candidate maps for {ell} atoms and k={k} exceed the budget {budget}")
    G = restricted_growth_strings(ell, k)
    scores = _score_assignments(G, pos, neg)
    i = int(np.argmin(scores))
    total = int(pos.sum() + neg.sum())
    score = float(scores[i]) if mode == "exact" else float(scores[i]) / max(total, 1)
    return AssignmentResult(G[i].astype(np.int64), score, count, mode, 0 if mode == "exact" else total)


# -- preprocessing handle -----------------------------------------------------

@dataclass
class PtasHandle:
    decomp: CutDecomposition
    k: int
    atom_index: dict
    assignment: np.ndarray
    eps: float
    mode: str
    default_cluster: int = 0
    stats: dict = field(default_factory=dict)

    @property
    def num_atoms(self) -> int:
        return len(self.atom_index)

    def cluster_of_atom(self, label: str) -> int:
        t = self.atom_index.get(label)
        return self.default_cluster if t is None else int(self.assignment[t])

    def to_json(self) -> str:
        return json.dumps(dict(
            decomp=json.loads(self.decomp.to_json()), k=self.k,
            atoms=list(self.atom_index), assignment=[int(x) for x in self.assignment],
            eps=self.eps, mode=self.mode, default_cluster=self.default_cluster,
            stats=self.stats), sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "PtasHandle":
        raw = json.loads(text)
        return cls(CutDecomposition.from_json(json.dumps(raw["decomp"])), raw["k"],
                   {a: i for i, a in enumerate(raw["atoms"])},
                   np.asarray(raw["assignment"], dtype=np.int64), raw["eps"], raw["mode"],
                   raw["default_cluster"], raw["stats"])


def _decompose(oracle, g, eps_d, max_width, seed, decomposition, fk_options):
    use_exact = decomposition == "exact" or (
        decomposition == "auto" and g is not None and g.n <= EXACT_DECOMP_LIMIT)
    if use_exact:
        if g is None:
            raise ValueError("the exact decomposition needs a materialised graph")
        return exact_cut_decomposition(g, eps_d, max_width=max_width)
    opts = dict(max_sample=64)
    opts.update(fk_options or {})
    return fk_cut_decomposition(oracle, eps_d, max_width=max_width, seed=seed, **opts)


def ptas_preprocess(eps: float, oracle: EdgeOracle, seed, g: SignedGraph | None = None,
                    mode: str = "exact", max_width: int = DEFAULT_MAX_WIDTH,
                    decomposition: str = "auto", k: int | None = None,
                    budget: int = ENUMERATION_BUDGET, fk_options: dict | None = None) -> PtasHandle:
    """Decomposition at accuracy ``eps/(2k)`` plus the best atom assignment.

    ``mode="exact"`` needs the materialised graph ``g`` and scores maps by
    their true cost.  ``mode="sampled"`` labels the endpoints of sampled pairs
    and scores maps on those pairs; atoms never met in the sample go to
    cluster 0.
    """
    ctx = as_seed(seed)
    k = choose_k(eps) if k is None else k
    eps_d = eps / (2 * k)
    start = oracle.query_count
    decomp = _decompose(oracle, g, eps_d, max_width, ctx.child("ptas:fk"), decomposition, fk_options)
    stats = dict(width=decomp.width, decomposition=decomp.kind)
    if mode == "exact":
        if g is None:
            raise ValueError("exact mode needs a materialised graph")
        tiled = build_tiled(decomp, g, oracle, k, eps)
        res = best_assignment(tiled, k, eps, "exact", budget=budget)
        atom_index = {lab: i for i, lab in enumerate(tiled.labels)}
        stats.update(size_bound=tiled.size_bound, size_bound_violated=tiled.size_bound_violated)
    elif mode == "sampled":
        n = oracle.n
        rng_pairs = ctx.rng("ptas:pairs")
        atom_index: dict[str, int] = {}
        us, ws, tus, tws = [], [], [], []
        have, need = 0, sampled_pair_count(eps, k, 1)
        while have < need:
            u, w = sample_pairs(n, need - have, rng_pairs)
            labs = atom_labels(decomp, np.concatenate([u, w]), oracle)
            idx = np.array([atom_index.setdefault(lab, len(atom_index)) for lab in labs],
                           dtype=np.int64)
            us.append(u)
            ws.append(w)
            tus.append(idx[:u.size])
            tws.append(idx[u.size:])
            have += u.size
            if assignment_count(len(atom_index), k) > budget:
                raise EnumerationBudgetExceeded(
                    f"{len(atom_index)} sampled atoms with k={k} exceed the budget {budget}")
            need = sampled_pair_count(eps, k, len(atom_index))
        us, ws = np.concatenate(us), np.concatenate(ws)
        tu, tw = np.concatenate(tus), np.concatenate(tws)
        sign = oracle.query_many(us, ws)
        ell = len(atom_index)
        a, b = np.minimum(tu, tw), np.maximum(tu, tw)
        pos = np.zeros((ell, ell), dtype=np.int64)
        neg = np.zeros((ell, ell), dtype=np.int64)
        np.add.at(pos, (a[sign], b[sign]), 1)
        np.add.at(neg, (a[~sign], b[~sign]), 1)
        res = best_assignment(None, k, eps, "sampled", pair_counts=(pos, neg), budget=budget)
        stats.update(samples=int(us.size))
    else:
        raise ValueError(f"unknown mode {mode!r}")
    stats.update(atoms=len(atom_index), candidates=res.candidates, score=res.score,
                 preprocessing_queries=oracle.query_count - start)
    return PtasHandle(decomp, k, atom_index, res.assignment, eps, mode, 0, stats)


def ptas_local_cluster(v: int, handle: PtasHandle, oracle: EdgeOracle | None = None) -> int:
    """Cluster of v: the assigned cluster of its atom."""
    return handle.cluster_of_atom(atom_labels(handle.decomp, [v], oracle)[0])


def ptas_explicit(eps: float, oracle: EdgeOracle, seed, g: SignedGraph | None = None,
                  return_handle: bool = False, **kwargs):
    """Preprocess once, then label every vertex through its atom."""
    handle = ptas_preprocess(eps, oracle, seed, g=g, **kwargs)
    labs = atom_labels(handle.decomp, np.arange(oracle.n), oracle)
    labels = np.array([handle.cluster_of_atom(x) for x in labs], dtype=np.int64)
    return (labels, handle) if return_handle else labels
