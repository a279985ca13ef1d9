"""Weighted undirected interaction graphs and the random-walk quantities derived from them."""
from __future__ import annotations

import hashlib
import math
from pathlib import Path
from typing import Iterable, Optional, Sequence, Tuple, Union

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components

from .errors import (
    AsymmetricDuplicate,
    Disconnected,
    InvalidK,
    InvalidParams,
    NonPositiveWeight,
    SelfLoop,
    TooSmall,
    ValidationError,
)

Edge = Tuple[int, int, float]


class WeightedGraph:
    """Immutable connected graph with symmetric positive edge weights.

    Edges are kept once each as ``(u, v, w)`` with ``u < v`` in lexicographic
    order; per-vertex sorted neighbour lists are held in CSR form
    (``indptr``, ``indices``, ``weights``) so that neighbour sums cost O(deg).
    """

    def __init__(self, n: int, u: np.ndarray, v: np.ndarray, w: np.ndarray):
        self.n = int(n)
        self.u = _frozen(np.asarray(u, dtype=np.int64))
        self.v = _frozen(np.asarray(v, dtype=np.int64))
        self.w = _frozen(np.asarray(w, dtype=np.float64))

        rows = np.concatenate([self.u, self.v])
        cols = np.concatenate([self.v, self.u])
        vals = np.concatenate([self.w, self.w])
        adj = coo_matrix((vals, (rows, cols)), shape=(self.n, self.n)).tocsr()
        adj.sort_indices()
        self.indptr = _frozen(adj.indptr.astype(np.int64))
        self.indices = _frozen(adj.indices.astype(np.int64))
        self.weights = _frozen(adj.data.astype(np.float64))

        # compensated sums keep W and pi exact to rounding on large graphs
        self.strength = _frozen(np.array([
            math.fsum(self.weights[self.indptr[i]:self.indptr[i + 1]]) for i in range(self.n)
        ]))
        self.total_weight = math.fsum(self.strength)
        self.stationary = _frozen(self.strength / self.total_weight)
        deg = np.diff(self.indptr)
        self.step_probs = _frozen(self.weights / np.repeat(self.strength, deg))

    # -- basic views -------------------------------------------------------

    @property
    def num_edges(self) -> int:
        return len(self.w)

    @property
    def degree(self) -> np.ndarray:
        return np.diff(self.indptr)

    def neighbors(self, i: int) -> np.ndarray:
        return self.indices[self.indptr[i]:self.indptr[i + 1]]

    def neighbor_weights(self, i: int) -> np.ndarray:
        return self.weights[self.indptr[i]:self.indptr[i + 1]]

    def neighbor_probs(self, i: int) -> np.ndarray:
        return self.step_probs[self.indptr[i]:self.indptr[i + 1]]

    def edges(self) -> list:
        return [(int(a), int(b), float(c)) for a, b, c in zip(self.u, self.v, self.w)]

    def weight_matrix(self) -> np.ndarray:
        out = np.zeros((self.n, self.n))
        out[self.u, self.v] = self.w
        out[self.v, self.u] = self.w
        return out

    def step_matrix(self) -> np.ndarray:
        """Dense random-walk kernel p_ij = w_ij / w_i."""
        return self.weight_matrix() / self.strength[:, None]

    def neutral_step_matrix(self) -> np.ndarray:
        """Lazy kernel of the neutral walk: half the ordinary step, half a self-loop."""
        return 0.5 * self.step_matrix() + 0.5 * np.eye(self.n)

    def is_unweighted(self) -> bool:
        return bool(np.all(self.w == 1.0))

    def scaled(self, factor: float) -> "WeightedGraph":
        if not factor > 0:
            raise NonPositiveWeight(f"scale factor must be positive, got {factor!r}")
        return WeightedGraph(self.n, self.u, self.v, self.w * factor)

    def relabeled(self, perm: Sequence[int]) -> "WeightedGraph":
        """Graph with vertex ``i`` renamed to ``perm[i]``."""
        perm = np.asarray(perm, dtype=np.int64)
        if sorted(perm.tolist()) != list(range(self.n)):
            raise ValidationError("relabeling must be a permutation of the vertices")
        return from_edge_list(zip(perm[self.u], perm[self.v], self.w), n=self.n)

    def content_hash(self) -> str:
        """SHA-256 of the canonical edge-list text; identifies cached tables."""
        return hashlib.sha256(write_edge_list(self).encode()).hexdigest()

    def __eq__(self, other):
        if not isinstance(other, WeightedGraph):
            return NotImplemented
        return (
            self.n == other.n
            and np.array_equal(self.u, other.u)
            and np.array_equal(self.v, other.v)
            and np.array_equal(self.w, other.w)
        )

    def __hash__(self):
        return hash(self.content_hash())

    def __repr__(self):
        return f"WeightedGraph(n={self.n}, edges={self.num_edges}, W={self.total_weight:g})"


def _frozen(a: np.ndarray) -> np.ndarray:
    a.setflags(write=False)
    return a


# -- construction -----------------------------------------------------------

def from_edge_list(entries: Iterable[Edge], n: Optional[int] = None) -> WeightedGraph:
    """Build a graph from ``(i, j, weight)`` triples, given in either orientation.

    Repeating an edge with an identical weight is harmless; repeating it with a
    different weight raises :class:`AsymmetricDuplicate`.
    """
    seen = {}
    max_index = -1
    for entry in entries:
        i, j, wt = entry
        if int(i) != i or int(j) != j:
            raise ValidationError(f"vertex indices must be integers, got ({i!r}, {j!r})")
        i, j, wt = int(i), int(j), float(wt)
        if i < 0 or j < 0:
            raise ValidationError(f"negative vertex index in ({i}, {j})")
        if i == j:
            raise SelfLoop(i)
        if not (math.isfinite(wt) and wt > 0):
            raise NonPositiveWeight(f"edge ({i}, {j}) has weight {wt!r}; weights must be finite and > 0")
        key = (i, j) if i < j else (j, i)
        if key in seen and seen[key] != wt:
            raise AsymmetricDuplicate(key[0], key[1], seen[key], wt)
        seen[key] = wt
        max_index = max(max_index, i, j)

    if n is None:
        n = max_index + 1
    elif max_index >= n:
        raise ValidationError(f"vertex index {max_index} out of range for n={n}")
    if n < 2:
        raise TooSmall(f"need at least 2 vertices, got {n}")

    keys = sorted(seen)
    u = np.array([k[0] for k in keys], dtype=np.int64)
    v = np.array([k[1] for k in keys], dtype=np.int64)
    w = np.array([seen[k] for k in keys], dtype=np.float64)

    adj = coo_matrix((np.ones(len(u)), (u, v)), shape=(n, n))
    ncomp, labels = connected_components(adj, directed=False)
    if ncomp > 1:
        comps = [np.flatnonzero(labels == c).tolist() for c in range(ncomp)]
        raise Disconnected(comps)
    return WeightedGraph(n, u, v, w)


def complete(n: int) -> WeightedGraph:
    if n < 2:
        raise TooSmall(f"need at least 2 vertices, got {n}")
    return from_edge_list(((i, j, 1.0) for i in range(n) for j in range(i + 1, n)), n=n)


def path(n: int) -> WeightedGraph:
    if n < 2:
        raise TooSmall(f"need at least 2 vertices, got {n}")
    return from_edge_list(((i, i + 1, 1.0) for i in range(n - 1)), n=n)


def ring(n: int) -> WeightedGraph:
    if n < 3:
        raise TooSmall(f"a ring needs at least 3 vertices, got {n}")
    return from_edge_list(((i, (i + 1) % n, 1.0) for i in range(n)), n=n)


def star(n: int) -> WeightedGraph:
    """Star with centre 0 and ``n - 1`` leaves."""
    if n < 2:
        raise TooSmall(f"need at least 2 vertices, got {n}")
    return from_edge_list(((0, i, 1.0) for i in range(1, n)), n=n)


def newman_watts(n: int, k: int, p: float, seed: int) -> WeightedGraph:
    """Ring lattice (k/2 neighbours per side) plus random shortcuts.

    Each lattice edge, visited in order, independently triggers one shortcut
    with probability ``p``. A shortcut joins two uniformly drawn distinct
    vertices that are not already adjacent (re-drawn until valid). Nothing is
    removed, so the ring backbone keeps the graph connected.
    """
    if k % 2 != 0 or k < 2 or k >= n:
        raise InvalidK(f"k must be even with 2 <= k < n, got k={k}, n={n}")
    if not 0.0 <= p <= 1.0:
        raise InvalidParams(f"p must lie in [0, 1], got {p}")
    rng = np.random.default_rng(seed)
    edges = set()
    for i in range(n):
        for step in range(1, k // 2 + 1):
            j = (i + step) % n
            edges.add((min(i, j), max(i, j)))
    lattice = sorted(edges)
    max_edges = n * (n - 1) // 2
    for _ in lattice:
        if rng.random() >= p:
            continue
        if len(edges) >= max_edges:
            break
        while True:
            i, j = (int(x) for x in rng.integers(0, n, size=2))
            if i == j:
                continue
            key = (min(i, j), max(i, j))
            if key not in edges:
                edges.add(key)
                break
    return from_edge_list(((i, j, 1.0) for i, j in sorted(edges)), n=n)


def barabasi_albert(n: int, m0: int, m: int, seed: int) -> WeightedGraph:
    """Preferential attachment grown from a clique on ``m0`` vertices.

    Every new vertex links to ``m`` distinct existing vertices drawn without
    replacement with probability proportional to their current degree.
    """
    if not (1 <= m <= m0 < n):
        raise InvalidParams(f"need 1 <= m <= m0 < n, got n={n}, m0={m0}, m={m}")
    if m0 < 2:
        raise InvalidParams("the seed clique needs m0 >= 2 so every vertex starts with positive degree")
    rng = np.random.default_rng(seed)
    edges = [(i, j) for i in range(m0) for j in range(i + 1, m0)]
    degree = np.zeros(n)
    degree[:m0] = m0 - 1
    for v in range(m0, n):
        weights = degree[:v] / degree[:v].sum()
        targets = rng.choice(v, size=m, replace=False, p=weights)
        for t in sorted(int(x) for x in targets):
            edges.append((t, v))
            degree[t] += 1
        degree[v] = m
    return from_edge_list(((i, j, 1.0) for i, j in edges), n=n)


def random_connected(n: int, p: float, seed: int, weighted: bool = False) -> WeightedGraph:
    """Erdos-Renyi graph made connected by a random spanning path.

    Used for property tests; weights are drawn from U(0.5, 2) when ``weighted``.
    """
    if n < 2:
        raise TooSmall(f"need at least 2 vertices, got {n}")
    rng = np.random.default_rng(seed)
    order = rng.permutation(n)
    edges = {(min(a, b), max(a, b)) for a, b in zip(order[:-1].tolist(), order[1:].tolist())}
    for i in range(n):
        for j in range(i + 1, n):
            if rng.random() < p:
                edges.add((i, j))
    keys = sorted(edges)
    ws = rng.uniform(0.5, 2.0, size=len(keys)) if weighted else np.ones(len(keys))
    return from_edge_list(((i, j, w) for (i, j), w in zip(keys, ws)), n=n)


# -- edge-list text format -------------------------------------------------

def _format_weight(w: float) -> str:
    w = float(w)
    short = f"{w:g}"
    return short if float(short) == w else repr(w)


def write_edge_list(g: WeightedGraph, header: Optional[Sequence[str]] = None) -> str:
    """One ``i j w`` line per edge with ``i < j``; ``#`` lines are comments."""
    lines = [f"# {h}" for h in (header or ())]
    lines += [f"{i} {j} {_format_weight(w)}" for i, j, w in zip(g.u, g.v, g.w)]
    return "\n".join(lines) + "\n"


def read_edge_list(text: str, n: Optional[int] = None) -> WeightedGraph:
    entries = []
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        if len(parts) not in (2, 3):
            raise ValidationError(f"line {lineno}: expected 'i j [w]', got {raw!r}")
        try:
            i, j = int(parts[0]), int(parts[1])
            wt = float(parts[2]) if len(parts) == 3 else 1.0
        except ValueError as exc:
            raise ValidationError(f"line {lineno}: {exc}") from None
        entries.append((i, j, wt))
    return from_edge_list(entries, n=n)


def save(g: WeightedGraph, path: Union[str, Path], header: Optional[Sequence[str]] = None) -> None:
    Path(path).write_text(write_edge_list(g, header))


def load(path: Union[str, Path]) -> WeightedGraph:
    return read_edge_list(Path(path).read_text())
