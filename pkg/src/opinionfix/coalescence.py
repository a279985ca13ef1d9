"""Coalescence times of random walks on the lazy neutral walk graph.

The neutral walk steps from ``i`` to a neighbour ``j`` with probability
``p_ij / 2`` and stays put with probability ``1/2``. Two kinds of triple
table are supported:

``paper-literal``
    Discrete time. Each step picks one of the three walker slots uniformly
    and the walkers sharing that slot's vertex move together. Values are step
    counts; a coalesced pair therefore moves at twice the rate of a lone walker.

``lineage``
    Continuous time. Each surviving lineage moves at unit rate, so a merged
    pair behaves as a single walker. For three distinct positions
    ``theta = 1/3 + (1/3) sum(...)``; on repeated positions ``theta`` equals
    the continuous pair time ``tau_uv / 2``.

Pair times are always the discrete-time values ``tau_ij``.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Sequence, Tuple

import numpy as np
from scipy.sparse import coo_matrix, csr_matrix, identity
from scipy.sparse.linalg import spsolve

from . import _kernels
from .errors import ConventionMismatch, NotConverged, ValidationError
from .netgraph import WeightedGraph

log = logging.getLogger(__name__)

PAPER_LITERAL = "paper-literal"
LINEAGE = "lineage"
CONVENTIONS = (PAPER_LITERAL, LINEAGE)

DEFAULT_TOL = 1e-12
DEFAULT_MAX_ITER = 10**6
DIRECT_LIMIT = 6000  # unknowns above which "auto" switches to Gauss-Seidel


def check_convention(convention: str) -> str:
    if convention not in CONVENTIONS:
        raise ValidationError(f"unknown convention {convention!r}; expected one of {CONVENTIONS}")
    return convention


# -- canonical indexing of sorted triples ---------------------------------

def triple_count(n: int) -> int:
    return (n + 2) * (n + 1) * n // 6


def triple_rank(i, j, k):
    """Colex rank of the sorted triple ``i <= j <= k`` (vectorised)."""
    i = np.asarray(i, dtype=np.int64)
    j = np.asarray(j, dtype=np.int64)
    k = np.asarray(k, dtype=np.int64)
    return i + (j + 1) * j // 2 + (k + 2) * (k + 1) * k // 6


def sorted_triples(n: int) -> np.ndarray:
    """All sorted triples in rank order, shape (count, 3)."""
    out = np.empty((triple_count(n), 3), dtype=np.int64)
    r = 0
    for k in range(n):
        for j in range(k + 1):
            m = j + 1
            out[r:r + m, 0] = np.arange(m)
            out[r:r + m, 1] = j
            out[r:r + m, 2] = k
            r += m
    return out


# -- tables -----------------------------------------------------------------

@dataclass(frozen=True)
class PairTimes:
    tau: np.ndarray
    graph_hash: str
    residual: float = 0.0
    iterations: int = 0
    method: str = "direct"

    @property
    def n(self) -> int:
        return self.tau.shape[0]

    def __call__(self, i, j):
        return self.tau[i, j]


@dataclass(frozen=True)
class TripleTimes:
    convention: str
    n: int
    values: np.ndarray  # indexed by triple_rank of the sorted triple
    graph_hash: str
    residual: float = 0.0
    iterations: int = 0
    method: str = "direct"

    def lookup(self, i, j, k) -> np.ndarray:
        t = np.sort(np.stack(np.broadcast_arrays(i, j, k)), axis=0)
        return self.values[triple_rank(t[0], t[1], t[2])]

    def value(self, i: int, j: int, k: int) -> float:
        a, b, c = sorted((i, j, k))
        return float(self.values[triple_rank(a, b, c)])

    def as_array(self) -> np.ndarray:
        idx = np.indices((self.n,) * 3)
        return self.lookup(idx[0], idx[1], idx[2])


# -- system assembly --------------------------------------------------------

def _lazy_walk(g: WeightedGraph):
    """CSR of the lazy walk including the self-loop (probability 1/2)."""
    n = g.n
    deg = g.degree
    indptr = np.zeros(n + 1, dtype=np.int64)
    indptr[1:] = np.cumsum(deg + 1)
    indices = np.empty(indptr[-1], dtype=np.int64)
    probs = np.empty(indptr[-1])
    for v in range(n):
        lo = indptr[v]
        indices[lo] = v
        probs[lo] = 0.5
        indices[lo + 1:indptr[v + 1]] = g.neighbors(v)
        probs[lo + 1:indptr[v + 1]] = 0.5 * g.neighbor_probs(v)
    return indptr, indices, probs


def _moves(states: np.ndarray, walk):
    """Expand every state by moving each walker slot one lazy step.

    Walkers sharing the moved slot's vertex move with it. Returns the source
    row, the new state and the probability weight (slot weight 1/r times the
    step probability).
    """
    indptr, indices, probs = walk
    count, r = states.shape
    rows, news, coefs = [], [], []
    for t in range(r):
        v = states[:, t]
        deg = indptr[v + 1] - indptr[v]
        src = np.repeat(np.arange(count), deg)
        offsets = np.repeat(indptr[v] - np.concatenate([[0], np.cumsum(deg)[:-1]]), deg)
        pos = offsets + np.arange(deg.sum())
        x = indices[pos]
        # replace every walker sitting on the moved vertex
        mask = states[src] == v[src][:, None]
        moved = np.where(mask, x[:, None], states[src])
        rows.append(src)
        news.append(moved)
        coefs.append(probs[pos] / r)
    return np.concatenate(rows), np.concatenate(news), np.concatenate(coefs)


def _pair_system(g: WeightedGraph):
    n = g.n
    iu, ju = np.triu_indices(n, 1)
    states = np.stack([iu, ju], axis=1)
    index = -np.ones((n, n), dtype=np.int64)
    index[iu, ju] = np.arange(len(iu))
    index[ju, iu] = np.arange(len(iu))
    src, new, coef = _moves(states, _lazy_walk(g))
    col = index[new[:, 0], new[:, 1]]
    keep = col >= 0
    m = coo_matrix((coef[keep], (src[keep], col[keep])), shape=(len(iu),) * 2).tocsr()
    b = np.ones(len(iu))
    return states, m, b


def _triple_system(g: WeightedGraph, convention: str, pair: Optional[PairTimes]):
    n = g.n
    allt = sorted_triples(n)
    a, bb, c = allt[:, 0], allt[:, 1], allt[:, 2]
    if convention == PAPER_LITERAL:
        unknown = ~((a == bb) & (bb == c))
    else:
        unknown = (a < bb) & (bb < c)
    states = allt[unknown]
    col_of_rank = -np.ones(len(allt), dtype=np.int64)
    col_of_rank[np.flatnonzero(unknown)] = np.arange(len(states))

    src, new, coef = _moves(states, _lazy_walk(g))
    new.sort(axis=1)
    col = col_of_rank[triple_rank(new[:, 0], new[:, 1], new[:, 2])]
    keep = col >= 0
    m = coo_matrix((coef[keep], (src[keep], col[keep])), shape=(len(states),) * 2).tocsr()

    if convention == PAPER_LITERAL:
        b = np.ones(len(states))
    else:
        b = np.full(len(states), 1.0 / 3.0)
        # lineage boundary: two lineages left, continuous pair time tau/2
        bnd = ~keep
        u = np.where(new[bnd, 0] == new[bnd, 1], new[bnd, 1], new[bnd, 0])
        w = np.where(new[bnd, 0] == new[bnd, 1], new[bnd, 2], new[bnd, 1])
        const = coef[bnd] * pair.tau[u, w] / 2.0
        b += np.bincount(src[bnd], weights=const, minlength=len(states))
    return allt, unknown, states, m, b


# -- solvers ----------------------------------------------------------------

def _residual(m: csr_matrix, b: np.ndarray, x: np.ndarray) -> float:
    if len(x) == 0:
        return 0.0
    return float(np.max(np.abs(b + m @ x - x)))


def solve_fixed_point(m: csr_matrix, b: np.ndarray, method: str = "auto",
                      tol: float = DEFAULT_TOL, max_iter: int = DEFAULT_MAX_ITER,
                      x0: Optional[np.ndarray] = None) -> Tuple[np.ndarray, float, int, str]:
    """Solve x = b + M x for a substochastic M.

    ``method`` is ``direct`` (sparse LU), ``gauss-seidel`` or ``auto``.
    Returns (x, max-norm residual, sweeps, method used).
    """
    size = len(b)
    if method == "auto":
        method = "direct" if size <= DIRECT_LIMIT else "gauss-seidel"
    if size == 0:
        return np.zeros(0), 0.0, 0, method

    if method == "direct":
        a = (identity(size, format="csc") - m.tocsc())
        x = np.atleast_1d(spsolve(a, b))
        res = _residual(m, b, x)
        if not np.isfinite(res) or res > tol:
            # one refinement pass against accumulated rounding
            x = x + np.atleast_1d(spsolve(a, b + m @ x - x))
            res = _residual(m, b, x)
        if not np.isfinite(res) or res > tol:
            raise NotConverged(1, res)
        return x, res, 1, method

    if method != "gauss-seidel":
        raise ValidationError(f"unknown solver method {method!r}")
    m = csr_matrix(m)
    diag = m.diagonal().copy()
    off = m - csr_matrix((diag, (np.arange(size), np.arange(size))), shape=m.shape)
    off.eliminate_zeros()
    off.sort_indices()
    indptr = off.indptr.astype(np.int64)
    indices = off.indices.astype(np.int64)
    data = off.data.astype(np.float64)
    x = np.zeros(size) if x0 is None else np.array(x0, dtype=float)
    done = 0
    chunk = 8
    res = np.inf
    while done < max_iter:
        sweeps = min(chunk, max_iter - done)
        _kernels.gauss_seidel_csr(indptr, indices, data, diag, b, x, sweeps)
        done += sweeps
        res = _residual(m, b, x)
        if res <= tol:
            return x, res, done, method
        chunk = min(chunk * 2, 256)
    raise NotConverged(max_iter, res)


def pair_times(g: WeightedGraph, tol: float = DEFAULT_TOL, max_iter: int = DEFAULT_MAX_ITER,
               method: str = "auto") -> PairTimes:
    """Expected discrete coalescence time of two walkers from every vertex pair."""
    states, m, b = _pair_system(g)
    x, res, iters, used = solve_fixed_point(m, b, method, tol, max_iter)
    tau = np.zeros((g.n, g.n))
    tau[states[:, 0], states[:, 1]] = x
    tau[states[:, 1], states[:, 0]] = x
    log.debug("pair times n=%d solved by %s, residual %.2e", g.n, used, res)
    return PairTimes(tau, g.content_hash(), res, iters, used)


def triple_times(g: WeightedGraph, pair: PairTimes, convention: str = PAPER_LITERAL,
                 tol: float = DEFAULT_TOL, max_iter: int = DEFAULT_MAX_ITER,
                 method: str = "auto") -> TripleTimes:
    check_convention(convention)
    if pair.graph_hash != g.content_hash() or pair.n != g.n:
        raise ConventionMismatch("pair table was solved on a different graph")
    allt, unknown, states, m, b = _triple_system(g, convention, pair)
    x, res, iters, used = solve_fixed_point(m, b, method, tol, max_iter)
    values = np.zeros(len(allt))
    values[unknown] = x
    if convention == LINEAGE:
        i, j, k = allt[:, 0], allt[:, 1], allt[:, 2]
        rep = ~unknown
        u = np.where(i == j, j, i)[rep]
        w = np.where(i == j, k, j)[rep]
        values[rep] = pair.tau[u, w] / 2.0
    log.debug("triple times (%s) n=%d solved by %s, residual %.2e", convention, g.n, used, res)
    return TripleTimes(convention, g.n, values, g.content_hash(), res, iters, used)


def pair_residual(g: WeightedGraph, pair: PairTimes) -> float:
    """Max violation of the pair recurrence, evaluated with the dense kernel."""
    pt = g.neutral_step_matrix()
    tau = pair.tau
    upd = 1.0 + 0.5 * (pt @ tau + (pt @ tau).T)
    np.fill_diagonal(upd, 0.0)
    return float(np.max(np.abs(upd - tau)))


def triple_residual(g: WeightedGraph, trip: TripleTimes, pair: PairTimes) -> float:
    """Max violation of the triple recurrence, evaluated with dense tensors.

    Independent of the sparse assembly: the recurrence is rebuilt from the
    lazy kernel with explicit multiplicity weights.
    """
    n = g.n
    pt = g.neutral_step_matrix()
    t = trip.as_array()
    i, j, k = np.indices((n, n, n))
    # moving slot 0, 1 or 2, carrying any co-located walkers with it
    m0 = np.einsum("ix,xjk->ijk", pt, t)
    m1 = np.einsum("jx,ixk->ijk", pt, t)
    m2 = np.einsum("kx,ijx->ijk", pt, t)
    distinct = (i != j) & (j != k) & (i != k)
    if trip.convention == PAPER_LITERAL:
        upd = 1.0 + (m0 + m1 + m2) / 3.0
        # i == j != k: the pair moves with weight 2/3
        tt = t[np.arange(n), np.arange(n), :]          # tt[i,k] = tau_iik
        pair_move = np.einsum("ix,xk->ik", pt, tt)      # sum_x p_ix tau_xxk
        single_move = np.einsum("kx,ix->ik", pt, tt)    # sum_x p_kx tau_iix
        upd_rep = 1.0 + (2.0 * pair_move + single_move) / 3.0
        err = np.abs(upd - t)[distinct].max(initial=0.0)
        off = ~np.eye(n, dtype=bool)
        err = max(err, np.abs(upd_rep - tt)[off].max(initial=0.0))
    else:
        upd = 1.0 / 3.0 + (m0 + m1 + m2) / 3.0
        err = np.abs(upd - t)[distinct].max(initial=0.0)
        tt = t[np.arange(n), np.arange(n), :]
        err = max(err, np.abs(tt - pair.tau / 2.0).max())
    return float(err)


def simulate_coalescence(g: WeightedGraph, starts: Sequence[int], convention: str = PAPER_LITERAL,
                         trials: int = 10_000, seed: int = 0) -> Tuple[float, float]:
    """Monte Carlo coalescence time from ``starts`` (2 or 3 vertices).

    Returns (mean, standard error). Paper-literal times are step counts;
    lineage times are in continuous units, so for a pair they estimate
    ``tau_ij / 2``.
    """
    check_convention(convention)
    starts = np.asarray(starts, dtype=np.int64)
    if len(starts) not in (2, 3) or np.any(starts < 0) or np.any(starts >= g.n):
        raise ValidationError(f"starts must be 2 or 3 vertices of the graph, got {starts.tolist()}")
    if trials < 1:
        raise ValidationError("trials must be >= 1")
    cum = cumulative_step_probs(g)
    seeds = np.random.SeedSequence(seed).generate_state(trials, dtype=np.uint32)
    out = np.empty(trials)
    _kernels.simulate_walkers(g.indptr, g.indices, cum, starts, convention == LINEAGE, seeds, out)
    se = float(out.std(ddof=1) / np.sqrt(trials)) if trials > 1 else 0.0
    return float(out.mean()), se


def cumulative_step_probs(g: WeightedGraph) -> np.ndarray:
    """Per-vertex running sums of p_ij in CSR order, each segment ending at exactly 1."""
    cum = np.empty_like(g.step_probs)
    for v in range(g.n):
        lo, hi = g.indptr[v], g.indptr[v + 1]
        cum[lo:hi] = np.cumsum(g.step_probs[lo:hi])
        cum[hi - 1] = 1.0
    return cum


# -- caching -----------------------------------------------------------------

class TableCache:
    """Directory of solved tables keyed by graph content hash and convention."""

    def __init__(self, directory):
        self.directory = Path(directory)

    def _path(self, key: str, kind: str) -> Path:
        return self.directory / f"{key[:32]}.{kind}.npz"

    def pair(self, g: WeightedGraph, **solve_kw) -> PairTimes:
        key = g.content_hash()
        path = self._path(key, "pair")
        if path.exists():
            with np.load(path, allow_pickle=False) as z:
                if str(z["graph_hash"]) == key:
                    return PairTimes(z["tau"], key, float(z["residual"]), int(z["iterations"]), str(z["method"]))
        pt = pair_times(g, **solve_kw)
        self.directory.mkdir(parents=True, exist_ok=True)
        np.savez(path, tau=pt.tau, graph_hash=key, residual=pt.residual,
                 iterations=pt.iterations, method=pt.method)
        return pt

    def triple(self, g: WeightedGraph, pair: PairTimes, convention: str, **solve_kw) -> TripleTimes:
        key = g.content_hash()
        path = self._path(key, f"triple-{convention}")
        if path.exists():
            with np.load(path, allow_pickle=False) as z:
                if str(z["graph_hash"]) == key:
                    return TripleTimes(convention, g.n, z["values"], key, float(z["residual"]),
                                       int(z["iterations"]), str(z["method"]))
        tt = triple_times(g, pair, convention, **solve_kw)
        self.directory.mkdir(parents=True, exist_ok=True)
        np.savez(path, values=tt.values, graph_hash=key, residual=tt.residual,
                 iterations=tt.iterations, method=tt.method)
        return tt
