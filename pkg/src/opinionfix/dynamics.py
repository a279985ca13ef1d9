"""Score bookkeeping, pairwise-comparison Monte Carlo and the exact absorbing chain.

Time is simulated with the embedded discrete chain: each elementary step picks
a focal individual uniformly, a model neighbour with probability ``p_ij`` and
imitates with the Fermi probability. Absorption probabilities equal those of
the continuous-time chain in which every individual updates at unit rate.
"""
from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass
from typing import Callable, Optional, Union

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.linalg import spsolve

from . import _kernels
from .coalescence import cumulative_step_probs
from .errors import IllConditioned, MaxStepsExceeded, NegativeBeta, TooLarge, ValidationError
from .model import GameScores, as_state
from .netgraph import WeightedGraph

MAX_EXACT_N = 14
DEFAULT_MAX_STEPS = 10**9
FOCAL_MODES = ("uniform", "stationary")
WORKERS_ENV = "OPINIONFIX_WORKERS"


def default_workers() -> int:
    env = os.environ.get(WORKERS_ENV)
    if env:
        return max(1, int(env))
    return os.cpu_count() or 1


# -- scores -------------------------------------------------------------------

def neighbor_mean(g: WeightedGraph, s) -> np.ndarray:
    """s_i^(1) = sum_j p_ij s_j for every vertex."""
    s = as_state(s, g.n)
    return np.add.reduceat(g.step_probs * s[g.indices], g.indptr[:-1])


def accumulated_scores(g: WeightedGraph, scores: GameScores, s) -> np.ndarray:
    """Edge-weighted interaction score of every vertex, closed form."""
    s = as_state(s, g.n)
    s1 = neighbor_mean(g, s)
    a, b, c, d = scores.a, scores.b, scores.c, scores.d
    return g.strength * ((a - b - c + d) * s * s1 + (b - d) * s + (c - d) * s1 + d)


def accumulated_scores_direct(g: WeightedGraph, scores: GameScores, s) -> np.ndarray:
    """Same quantity as a plain neighbour sum over the score matrix."""
    s = as_state(s, g.n)
    table = np.array([[scores.d, scores.c], [scores.b, scores.a]])
    src = np.repeat(np.arange(g.n), g.degree)
    per_edge = g.weights * table[s[src], s[g.indices]]
    return np.add.reduceat(per_edge, g.indptr[:-1])


def accumulated_score(g: WeightedGraph, scores: GameScores, s, i: int) -> float:
    return float(accumulated_scores(g, scores, s)[i])


def total_scores(g: WeightedGraph, scores: GameScores, s) -> np.ndarray:
    s = as_state(s, g.n)
    return s * scores.delta_A + (1 - s) * scores.delta_B + accumulated_scores(g, scores, s)


def total_score(g: WeightedGraph, scores: GameScores, s, i: int) -> float:
    return float(total_scores(g, scores, s)[i])


def imitation_prob(f_i: float, f_j: float, beta: float) -> float:
    """Probability that an individual with score f_i copies one with score f_j."""
    if beta < 0:
        raise NegativeBeta(f"selection intensity must be >= 0, got {beta}")
    return 0.5 * (1.0 + math.tanh(0.5 * beta * (f_j - f_i)))


# -- Monte Carlo ------------------------------------------------------------------

@dataclass(frozen=True)
class FixationOutcome:
    fixed_a: bool
    steps: int


@dataclass(frozen=True)
class SimEstimate:
    runs: int
    fix_a: int
    seed: int
    beta: float
    mean_steps: float

    @property
    def rho_hat(self) -> float:
        return self.fix_a / self.runs

    @property
    def se(self) -> float:
        p = self.rho_hat
        return math.sqrt(p * (1.0 - p) / self.runs)

    def to_dict(self) -> dict:
        out = asdict(self)
        out.update(rho_hat=self.rho_hat, se=self.se)
        return out


def _focal_cum(g: WeightedGraph, focal: str) -> np.ndarray:
    if focal == "uniform":
        return np.zeros(0)
    if focal == "stationary":
        cum = np.cumsum(g.stationary)
        cum[-1] = 1.0
        return cum
    raise ValidationError(f"focal must be one of {FOCAL_MODES}, got {focal!r}")


def _run_batch(g, scores, beta, seeds, initial, focal, max_steps, verify=False):
    if beta < 0:
        raise NegativeBeta(f"selection intensity must be >= 0, got {beta}")
    count = len(seeds)
    outcome = np.empty(count, dtype=np.int64)
    steps = np.empty(count, dtype=np.int64)
    drift = np.empty(count)
    _kernels.run_fixation(
        g.indptr, g.indices, g.weights, cumulative_step_probs(g), _focal_cum(g, focal),
        scores.vector, float(beta), -1 if initial is None else int(initial),
        np.ascontiguousarray(seeds, dtype=np.uint32), int(max_steps), verify,
        outcome, steps, drift,
    )
    return outcome, steps, drift


def run_seeds(seed: int, count: int) -> np.ndarray:
    """Per-run generator seeds; entry ``r`` depends only on ``(seed, r)``."""
    return np.random.SeedSequence(seed).generate_state(count, dtype=np.uint32)


def run_to_fixation(g: WeightedGraph, scores: GameScores, beta: float, seed: int,
                    initial: Optional[int] = None, focal: str = "uniform",
                    max_steps: int = DEFAULT_MAX_STEPS) -> FixationOutcome:
    """One run from a single A individual (random vertex unless ``initial`` is given)."""
    if initial is not None and not 0 <= initial < g.n:
        raise ValidationError(f"initial vertex {initial} out of range")
    outcome, steps, _ = _run_batch(g, scores, beta, run_seeds(seed, 1), initial, focal, max_steps)
    if outcome[0] < 0:
        raise MaxStepsExceeded(max_steps, 0)
    return FixationOutcome(bool(outcome[0] == 1), int(steps[0]))


def score_drift(g: WeightedGraph, scores: GameScores, beta: float, seed: int, runs: int = 1) -> float:
    """Largest gap between incremental and recomputed scores over ``runs`` traces."""
    _, _, drift = _run_batch(g, scores, beta, run_seeds(seed, runs), None, "uniform",
                             DEFAULT_MAX_STEPS, verify=True)
    return float(drift.max())


def simulate_runs(g: WeightedGraph, scores: GameScores, beta: float, runs: int, seed: int,
                  workers: Optional[int] = None, focal: str = "uniform",
                  initial: Optional[int] = None, max_steps: int = DEFAULT_MAX_STEPS):
    """Raw per-run (outcome, steps) arrays, computed in contiguous chunks on a thread pool."""
    if runs < 1:
        raise ValidationError("runs must be >= 1")
    workers = default_workers() if workers is None else max(1, int(workers))
    seeds = run_seeds(seed, runs)
    chunks = np.array_split(seeds, min(workers, runs))
    job = lambda ch: _run_batch(g, scores, beta, ch, initial, focal, max_steps)[:2]
    if workers == 1:
        parts = [job(ch) for ch in chunks]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(job, chunks))
    outcome = np.concatenate([p[0] for p in parts])
    steps = np.concatenate([p[1] for p in parts])
    bad = np.flatnonzero(outcome < 0)
    if len(bad):
        raise MaxStepsExceeded(max_steps, int(bad[0]))
    return outcome, steps


def estimate_fixation(g: WeightedGraph, scores: GameScores, beta: float, runs: int, seed: int,
                      workers: Optional[int] = None, focal: str = "uniform",
                      max_steps: int = DEFAULT_MAX_STEPS) -> SimEstimate:
    outcome, steps = simulate_runs(g, scores, beta, runs, seed, workers, focal, None, max_steps)
    return SimEstimate(runs, int(outcome.sum()), seed, float(beta), float(steps.mean()))


# -- exact chain ------------------------------------------------------------------

def _state_bits(n: int) -> np.ndarray:
    return ((np.arange(2 ** n)[:, None] >> np.arange(n)) & 1).astype(np.int64)


def _all_total_scores(g: WeightedGraph, scores: GameScores, bits: np.ndarray) -> np.ndarray:
    omega = g.weight_matrix()
    na = bits @ omega          # weight of A neighbours
    nb = g.strength - na       # weight of B neighbours
    a, b, c, d = scores.a, scores.b, scores.c, scores.d
    inter = bits * (a * na + b * nb) + (1 - bits) * (c * na + d * nb)
    return bits * scores.delta_A + (1 - bits) * scores.delta_B + inter


def _flip_rates(g: WeightedGraph, scores: GameScores, beta: float, focal: str, bits: np.ndarray):
    """rates[s, i] = probability per elementary step that vertex i flips in state s."""
    n = g.n
    if focal not in FOCAL_MODES:
        raise ValidationError(f"focal must be one of {FOCAL_MODES}, got {focal!r}")
    f = _all_total_scores(g, scores, bits)
    weight = np.full(n, 1.0 / n) if focal == "uniform" else np.asarray(g.stationary)
    rates = np.zeros(bits.shape, dtype=float)
    for i in range(n):
        for j, p in zip(g.neighbors(i), g.neighbor_probs(i)):
            differ = bits[:, i] != bits[:, j]
            accept = 0.5 * (1.0 + np.tanh(0.5 * beta * (f[:, j] - f[:, i])))
            rates[:, i] += weight[i] * p * differ * accept
    return rates


def _absorption(rates: np.ndarray, n: int, rhs_all_a: bool = True, values=None) -> np.ndarray:
    """Solve the transient block of sum_i r_si (x_s - x_{s^i}) = v_s.

    With ``values`` None this gives the probability of absorbing in all-A;
    otherwise it gives the expected accumulated ``values`` before absorption.
    """
    size = 2 ** n
    full = size - 1
    transient = np.arange(1, full)
    col_of = -np.ones(size, dtype=np.int64)
    col_of[transient] = np.arange(len(transient))
    rows, cols, data = [], [], []
    rhs = np.zeros(len(transient)) if values is None else np.asarray(values, dtype=float)[transient].copy()
    total = rates[transient].sum(axis=1)
    rows.append(np.arange(len(transient)))
    cols.append(np.arange(len(transient)))
    data.append(total)
    for i in range(n):
        target = transient ^ (1 << i)
        r = rates[transient, i]
        inside = col_of[target] >= 0
        rows.append(np.flatnonzero(inside))
        cols.append(col_of[target[inside]])
        data.append(-r[inside])
        if values is None:
            rhs += np.where(target == full, r, 0.0)
    a = coo_matrix((np.concatenate(data), (np.concatenate(rows), np.concatenate(cols))),
                   shape=(len(transient),) * 2).tocsc()
    x = spsolve(a, rhs)
    out = np.zeros(size)
    out[transient] = x
    if values is None:
        out[full] = 1.0
    return out


def _check_exact_size(g: WeightedGraph):
    if g.n > MAX_EXACT_N:
        raise TooLarge(f"exact chain limited to n <= {MAX_EXACT_N}, got n={g.n}")


def exact_fixation(g: WeightedGraph, scores: GameScores, beta: float,
                   initial: Union[int, str, None] = "u-average", focal: str = "uniform") -> float:
    """Probability of reaching all-A from a single A individual, by linear algebra on all 2^n states.

    ``initial`` is a vertex index or ``"u-average"`` (mean over the n single-A
    states). ``beta`` may be negative here, which reverses selection; the slope
    oracle uses that for central differences.
    """
    _check_exact_size(g)
    bits = _state_bits(g.n)
    x = _absorption(_flip_rates(g, scores, beta, focal, bits), g.n)
    singles = x[1 << np.arange(g.n)]
    if initial is None or initial == "u-average":
        return float(singles.mean())
    if not 0 <= int(initial) < g.n:
        raise ValidationError(f"initial vertex {initial} out of range")
    return float(singles[int(initial)])


def weak_slope_oracle(g: WeightedGraph, scores: GameScores, focal: str = "uniform",
                      h: float = 1e-3) -> float:
    """d rho_A / d beta at beta = 0 from the exact chain.

    Central differences at h, h/2, h/4 combined by two Richardson levels.
    """
    _check_exact_size(g)
    steps = [h, h / 2, h / 4]
    diffs = [
        (exact_fixation(g, scores, s, focal=focal) - exact_fixation(g, scores, -s, focal=focal)) / (2 * s)
        for s in steps
    ]
    r1 = [(4 * diffs[1] - diffs[0]) / 3, (4 * diffs[2] - diffs[1]) / 3]
    r2 = (16 * r1[1] - r1[0]) / 15
    if abs(r2 - r1[1]) > 1e-4 * abs(r2) + 1e-12:
        raise IllConditioned(f"Richardson levels disagree: {r1[1]!r} vs {r2!r}")
    return float(r2)


def neutral_time_integral(g: WeightedGraph, fn: Callable[[np.ndarray], float]) -> float:
    """Integral over time of E_u[fn(S(t))] under neutral drift.

    Continuous time with every individual updating at unit rate; ``fn`` must
    vanish on the two absorbing states for the integral to be finite.
    """
    _check_exact_size(g)
    n = g.n
    bits = _state_bits(n)
    values = np.array([fn(row) for row in bits])
    if abs(values[0]) > 1e-12 or abs(values[-1]) > 1e-12:
        raise ValidationError("integrand must vanish on the absorbing states")
    # per-individual unit clock: rates are n times the per-step probabilities
    rates = n * _flip_rates(g, GameScores(), 0.0, "uniform", bits)
    h = _absorption(rates, n, values=values)
    return float(h[1 << np.arange(n)].mean())
