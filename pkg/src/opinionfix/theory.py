"""Weak-selection fixation theory.

To first order in the selection intensity, ``rho_A = 1/N + beta * <D'>``,
where ``<D'>`` is a linear combination of four coalescence-time sums::

    pair  = sum_ij  pi_i^2 p_ij tau_ij
    cross = sum_ijk pi_i^2 p_ij p_ik (tau_jk - tau_ik)
    trip  = sum_ijk pi_i^2 p_ij p_ik (T_ijk - T_iik)       (times 3 under lineage)
    basic = sum_ij  pi_i p_ij tau_ij

and ``<D'> = W/2 [(a-b-c+d) trip/3N + (b-d) pair/2N + (c-d) cross/2N]
+ (dA-dB)/2 * basic/2N``. All sums run over neighbours only.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Dict

import numpy as np

from .coalescence import LINEAGE, PAPER_LITERAL, PairTimes, TripleTimes, check_convention
from .dynamics import total_scores
from .errors import ConventionMismatch, NoFiniteThreshold, ValidationError
from .model import GameScores, as_state
from .netgraph import WeightedGraph

log = logging.getLogger(__name__)

__all__ = [
    "GameScores",
    "WeakSelectionReport",
    "coalescence_sums",
    "critical_ratio_ad",
    "critical_ratio_ad_unweighted",
    "critical_ratio_bc",
    "critical_ratio_bc_unweighted",
    "degree_weighted_frequency",
    "dprime_expectation",
    "dprime_state",
    "favored",
]


def degree_weighted_frequency(g: WeightedGraph, s) -> float:
    s = as_state(s, g.n)
    return float(np.dot(g.stationary, s))


def dprime_state(g: WeightedGraph, scores: GameScores, s) -> float:
    """First-order rate of change of the degree-weighted frequency in state ``s``.

    ``1/2 sum_i pi_i s_i (f_i - f_i^(1))`` with f_i^(1) the p-weighted mean
    score of i's neighbours.
    """
    s = as_state(s, g.n)
    f = total_scores(g, scores, s)
    f1 = np.add.reduceat(g.step_probs * f[g.indices], g.indptr[:-1])
    return float(0.5 * np.sum(g.stationary * s * (f - f1)))


# -- coalescence sums ----------------------------------------------------------------

def _neighbor_triples(g: WeightedGraph):
    """Index arrays over (i, j, k) with j, k neighbours of i (j == k included)."""
    deg = g.degree
    i_of = np.repeat(np.arange(g.n), deg * deg)
    j_parts, k_parts, w_parts = [], [], []
    for i in range(g.n):
        nb = g.neighbors(i)
        pr = g.neighbor_probs(i)
        j_parts.append(np.repeat(nb, len(nb)))
        k_parts.append(np.tile(nb, len(nb)))
        w_parts.append(np.outer(pr, pr).ravel() * g.stationary[i] ** 2)
    return i_of, np.concatenate(j_parts), np.concatenate(k_parts), np.concatenate(w_parts)


def _check_tables(g: WeightedGraph, pair: PairTimes, triple: TripleTimes):
    key = g.content_hash()
    if pair.graph_hash != key or triple.graph_hash != key:
        raise ConventionMismatch("coalescence tables were solved on a different graph")
    check_convention(triple.convention)


def coalescence_sums(g: WeightedGraph, pair: PairTimes, triple: TripleTimes) -> Dict[str, float]:
    _check_tables(g, pair, triple)
    tau = pair.tau
    pi = g.stationary
    src = np.repeat(np.arange(g.n), g.degree)
    edge_w = pi[src] * g.step_probs * tau[src, g.indices]
    i, j, k, w = _neighbor_triples(g)
    trip_diff = triple.lookup(i, j, k) - triple.lookup(i, i, k)
    if triple.convention == LINEAGE:
        trip_diff = 3.0 * trip_diff
    return {
        "pair": float(np.sum(pi[src] * edge_w)),
        "cross": float(np.sum(w * (tau[j, k] - tau[i, k]))),
        "trip": float(np.sum(w * trip_diff)),
        "basic": float(np.sum(edge_w)),
    }


@dataclass(frozen=True)
class WeakSelectionReport:
    dprime: float
    convention: str
    n: int
    terms: Dict[str, float]
    scores: GameScores
    graph_hash: str
    sums: Dict[str, float] = field(default_factory=dict)

    @property
    def favored(self) -> bool:
        # strict: a vanishing first-order term is neutral, not favoured
        return self.dprime > 0

    def rho(self, beta: float) -> float:
        return 1.0 / self.n + beta * self.dprime

    def to_dict(self) -> dict:
        return {
            "dprime": self.dprime,
            "favored": self.favored,
            "convention": self.convention,
            "n": self.n,
            "terms": dict(self.terms),
            "sums": dict(self.sums),
            "scores": self.scores.to_dict(),
            "graph_hash": self.graph_hash,
        }


def dprime_expectation(g: WeightedGraph, scores: GameScores, pair: PairTimes,
                       triple: TripleTimes) -> WeakSelectionReport:
    sums = coalescence_sums(g, pair, triple)
    n, half_w = g.n, g.total_weight / 2.0
    a, b, c, d = scores.a, scores.b, scores.c, scores.d
    terms = {
        "triple": half_w * (a - b - c + d) * sums["trip"] / (3 * n),
        "pair": half_w * (b - d) * sums["pair"] / (2 * n),
        "cross": half_w * (c - d) * sums["cross"] / (2 * n),
        "basic": (scores.delta_A - scores.delta_B) / 2.0 * sums["basic"] / (2 * n),
    }
    total = terms["triple"] + terms["pair"] + terms["cross"] + terms["basic"]
    return WeakSelectionReport(total, triple.convention, n, terms, scores, g.content_hash(), sums)


def favored(g: WeightedGraph, scores: GameScores, pair: PairTimes, triple: TripleTimes) -> bool:
    return dprime_expectation(g, scores, pair, triple).favored


# -- critical ratios -----------------------------------------------------------------

def critical_ratio_ad(g: WeightedGraph, pair: PairTimes, triple: TripleTimes) -> float:
    """Root in a/d of <D'> when b = c = 0 and the basic scores agree.

    For d > 0, A is favoured exactly when a/d exceeds the returned value.
    """
    s = coalescence_sums(g, pair, triple)
    den = 2.0 * s["trip"]
    if not den > 0:
        raise NoFiniteThreshold("(a/d)*", den)
    return 3.0 * (s["pair"] + s["cross"]) / den - 1.0


def critical_ratio_bc(g: WeightedGraph, pair: PairTimes, triple: TripleTimes) -> float:
    """Root in b/c of <D'> when a = d = 0 and the basic scores agree.

    Which side of the root favours A depends on the sign of c.
    """
    s = coalescence_sums(g, pair, triple)
    den = 3.0 * s["pair"] - 2.0 * s["trip"]
    if not den > 0:
        raise NoFiniteThreshold("(b/c)*", den)
    return (2.0 * s["trip"] - 3.0 * s["cross"]) / den


def _degree_form_sums(g: WeightedGraph, pair: PairTimes, triple: TripleTimes):
    """Sums of the unweighted (degree) form, from dense adjacency tensors."""
    if not g.is_unweighted():
        raise ValidationError("the degree form applies to unweighted graphs only")
    _check_tables(g, pair, triple)
    adj = g.weight_matrix()
    deg = adj.sum(axis=1)
    tau = pair.tau
    t = triple.as_array()
    if triple.convention == LINEAGE:
        t = 3.0 * t
    t_iik = t[np.arange(g.n), np.arange(g.n), :]
    pair_sum = np.einsum("i,ij,ij->", deg, adj, tau)
    cross = np.einsum("ij,ik,jk->", adj, adj, tau) - np.einsum("ij,ik,ik->", adj, adj, tau)
    trip = np.einsum("ij,ik,ijk->", adj, adj, t) - np.einsum("ij,ik,ik->", adj, adj, t_iik)
    return pair_sum, cross, trip


def critical_ratio_ad_unweighted(g: WeightedGraph, pair: PairTimes, triple: TripleTimes) -> float:
    pair_sum, cross, trip = _degree_form_sums(g, pair, triple)
    den = 2.0 * trip
    if not den > 0:
        raise NoFiniteThreshold("(a/d)*", den)
    return 3.0 * pair_sum / den + 3.0 * cross / den - 1.0


def critical_ratio_bc_unweighted(g: WeightedGraph, pair: PairTimes, triple: TripleTimes) -> float:
    pair_sum, cross, trip = _degree_form_sums(g, pair, triple)
    den = 3.0 * pair_sum - 2.0 * trip
    if not den > 0:
        raise NoFiniteThreshold("(b/c)*", den)
    return 2.0 * trip / den - 3.0 * cross / den
