import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from opinionfix import dynamics, netgraph
from opinionfix.errors import MaxStepsExceeded, NegativeBeta, TooLarge, ValidationError
from opinionfix.model import GameScores

SCORES = GameScores(1.0, -0.3, -0.6, 0.8, 0.25, 0.0)
score_values = st.floats(-3, 3, allow_nan=False)
score_vectors = st.builds(GameScores, score_values, score_values, score_values, score_values,
                          score_values, score_values)


def random_state(n, seed):
    return np.random.default_rng(seed).integers(0, 2, n)


# -- scores -------------------------------------------------------------------------

def test_accumulated_uniform_states():
    g = netgraph.random_connected(7, 0.4, seed=2, weighted=True)
    sc = GameScores(a=2.0, d=0.5)
    np.testing.assert_allclose(dynamics.accumulated_scores(g, sc, np.zeros(7, int)), g.strength * 0.5)
    np.testing.assert_allclose(dynamics.accumulated_scores(g, sc, np.ones(7, int)), g.strength * 2.0)


def test_k2_scores():
    g = netgraph.complete(2)
    sc = GameScores(a=1.0, b=-2.0, c=-3.0, d=4.0, delta_A=0.5, delta_B=0.25)
    assert dynamics.accumulated_score(g, sc, [1, 0], 0) == -2.0
    assert dynamics.accumulated_score(g, sc, [1, 0], 1) == -3.0
    assert dynamics.total_score(g, sc, [1, 0], 0) == 0.5 - 2.0
    assert dynamics.total_score(g, sc, [1, 0], 1) == 0.25 - 3.0
    assert dynamics.total_score(g, sc, [0, 0], 1) == 0.25 + 4.0
    assert dynamics.total_score(g, GameScores(), [1, 0], 0) == 0


@given(score_vectors, st.integers(0, 2**31))
def test_closed_form_matches_neighbor_sum(scores, seed):
    g = netgraph.random_connected(9, 0.3, seed=seed, weighted=True)
    s = random_state(9, seed)
    closed = dynamics.accumulated_scores(g, scores, s)
    direct = dynamics.accumulated_scores_direct(g, scores, s)
    np.testing.assert_allclose(closed, direct, rtol=1e-12, atol=1e-12)


def test_imitation_prob():
    assert dynamics.imitation_prob(3.0, 3.0, 2.0) == 0.5
    assert dynamics.imitation_prob(-5.0, 7.0, 0.0) == 0.5
    assert dynamics.imitation_prob(0.0, math.log(3), 1.0) == pytest.approx(0.75, rel=1e-15)
    assert dynamics.imitation_prob(0.0, 1e6, 10.0) == 1.0
    assert dynamics.imitation_prob(1e6, 0.0, 10.0) == 0.0
    with pytest.raises(NegativeBeta):
        dynamics.imitation_prob(0, 1, -0.1)


@given(st.floats(-50, 50), st.floats(-50, 50), st.floats(0, 20))
def test_imitation_prob_logistic(fi, fj, beta):
    x = beta * (fj - fi)
    expected = 1 / (1 + math.exp(-x)) if x > -700 else 0.0
    assert dynamics.imitation_prob(fi, fj, beta) == pytest.approx(expected, abs=1e-15)


# -- single runs ------------------------------------------------------------------------------

def test_run_terminates_absorbed():
    g = netgraph.random_connected(8, 0.3, seed=1)
    for seed in range(20):
        out = dynamics.run_to_fixation(g, SCORES, 0.05, seed)
        assert out.steps >= 1
        assert out.fixed_a in (True, False)


def test_k2_forced_start_neutral():
    g = netgraph.complete(2)
    fixed = [dynamics.run_to_fixation(g, SCORES, 0.0, s, initial=0).fixed_a for s in range(4000)]
    p = np.mean(fixed)
    assert abs(p - 0.5) <= 3 * math.sqrt(0.25 / 4000)


def test_max_steps_guard():
    g = netgraph.ring(12)
    with pytest.raises(MaxStepsExceeded) as err:
        dynamics.estimate_fixation(g, SCORES, 0.0, 50, seed=3, max_steps=2)
    assert err.value.exit_code == 4
    assert "run" in str(err.value)


def test_incremental_scores_track_full_recompute():
    for seed in range(5):
        g = netgraph.random_connected(8, 0.35, seed=seed, weighted=True)
        assert dynamics.score_drift(g, SCORES, 0.2, seed, runs=50) <= 1e-9


@given(score_vectors, score_vectors)
def test_neutral_traces_ignore_scores(s1, s2):
    g = netgraph.star(6)
    for seed in range(5):
        assert dynamics.run_to_fixation(g, s1, 0.0, seed) == dynamics.run_to_fixation(g, s2, 0.0, seed)


def test_invalid_focal_and_initial():
    g = netgraph.ring(5)
    with pytest.raises(ValidationError):
        dynamics.run_to_fixation(g, SCORES, 0.1, 0, focal="degree")
    with pytest.raises(ValidationError):
        dynamics.run_to_fixation(g, SCORES, 0.1, 0, initial=7)
    with pytest.raises(NegativeBeta):
        dynamics.estimate_fixation(g, SCORES, -0.1, 10, 0)
    with pytest.raises(ValidationError):
        dynamics.estimate_fixation(g, SCORES, 0.1, 0, 0)


# -- estimates ----------------------------------------------------------------------------------

def test_single_run_estimate():
    est = dynamics.estimate_fixation(netgraph.ring(5), SCORES, 0.1, 1, seed=2)
    assert est.rho_hat in (0.0, 1.0)
    assert est.se == 0.0


def test_worker_count_does_not_change_results():
    g = netgraph.barabasi_albert(20, 3, 2, seed=5)
    one = dynamics.estimate_fixation(g, SCORES, 0.05, 3000, seed=42, workers=1)
    eight = dynamics.estimate_fixation(g, SCORES, 0.05, 3000, seed=42, workers=8)
    assert one == eight
    o1, s1 = dynamics.simulate_runs(g, SCORES, 0.05, 500, 7, workers=1)
    o8, s8 = dynamics.simulate_runs(g, SCORES, 0.05, 500, 7, workers=3)
    np.testing.assert_array_equal(o1, o8)
    np.testing.assert_array_equal(s1, s8)


def test_run_seeds_prefix_stable():
    assert np.array_equal(dynamics.run_seeds(9, 10)[:4], dynamics.run_seeds(9, 4))


@pytest.mark.parametrize("beta", [0.0, 0.05])
@pytest.mark.parametrize("make", [
    lambda: netgraph.complete(6),
    lambda: netgraph.star(7),
    lambda: netgraph.random_connected(8, 0.3, seed=4, weighted=True),
    lambda: netgraph.newman_watts(10, 4, 0.3, seed=2),
])
def test_estimate_matches_exact(beta, make):
    g = make()
    sc = GameScores(2.0, -1.0, -1.5, 1.0, 1.0, 0.0)
    est = dynamics.estimate_fixation(g, sc, beta, 20_000, seed=5)
    exact = dynamics.exact_fixation(g, sc, beta)
    assert abs(est.rho_hat - exact) <= 3 * est.se


def test_stationary_focal_matches_exact():
    g = netgraph.star(6)
    sc = GameScores(2.0, -1.0, -1.5, 1.0, 1.0, 0.0)
    est = dynamics.estimate_fixation(g, sc, 0.1, 20_000, seed=8, focal="stationary")
    exact = dynamics.exact_fixation(g, sc, 0.1, focal="stationary")
    assert abs(est.rho_hat - exact) <= 3 * est.se


def test_estimate_document():
    est = dynamics.estimate_fixation(netgraph.ring(5), SCORES, 0.1, 100, seed=2)
    doc = est.to_dict()
    assert doc["runs"] == 100 and doc["seed"] == 2
    assert doc["rho_hat"] == est.fix_a / 100


# -- exact chain -----------------------------------------------------------------------------

def k2_closed_form(beta, delta):
    """Two-state chain from one A: the A holder converts its neighbour or is converted."""
    up = dynamics.imitation_prob(0.0, delta, beta)     # B copies A
    down = dynamics.imitation_prob(delta, 0.0, beta)   # A copies B
    return up / (up + down)


@pytest.mark.parametrize("beta", [0.0, 0.3, 2.0])
def test_exact_k2_closed_form(beta):
    g = netgraph.complete(2)
    sc = GameScores(delta_A=1.5)
    assert dynamics.exact_fixation(g, sc, beta) == pytest.approx(k2_closed_form(beta, 1.5), abs=1e-14)


@pytest.mark.parametrize("n", [2, 3, 5, 8, 12])
def test_exact_neutral(n):
    g = netgraph.random_connected(n, 0.3, seed=n, weighted=True)
    assert dynamics.exact_fixation(g, SCORES, 0.0) == pytest.approx(1 / n, abs=1e-12)


def test_exact_zero_scores_any_beta():
    g = netgraph.star(6)
    assert dynamics.exact_fixation(g, GameScores(), 3.0) == pytest.approx(1 / 6, abs=1e-12)


def test_exact_too_large():
    with pytest.raises(TooLarge) as err:
        dynamics.exact_fixation(netgraph.ring(15), SCORES, 0.1)
    assert err.value.exit_code == 4


def test_exact_monotone_in_delta_a():
    g = netgraph.random_connected(7, 0.3, seed=6, weighted=True)
    vals = [dynamics.exact_fixation(g, GameScores(1, -0.5, -0.5, 1, da, 0.2), 0.3)
            for da in np.linspace(-2, 2, 9)]
    assert all(0 <= v <= 1 for v in vals)
    assert all(b >= a - 1e-15 for a, b in zip(vals, vals[1:]))


def test_slope_k2():
    g = netgraph.complete(2)
    assert dynamics.weak_slope_oracle(g, GameScores(delta_A=0.8, delta_B=0.2)) == \
        pytest.approx(0.6 / 4, rel=1e-6)
    h = 1e-4
    fd = (dynamics.exact_fixation(g, GameScores(delta_A=1), h)
          - dynamics.exact_fixation(g, GameScores(delta_A=1), -h)) / (2 * h)
    assert fd == pytest.approx(0.25, abs=1e-6)


def test_slope_zero_scores():
    assert dynamics.weak_slope_oracle(netgraph.ring(6), GameScores()) == pytest.approx(0, abs=1e-9)


def test_neutral_time_integral_validates_integrand():
    with pytest.raises(ValidationError):
        dynamics.neutral_time_integral(netgraph.ring(4), lambda s: 1.0)


def test_neutral_time_integral_k2():
    # from one A on K2, the process leaves the mixed state at total rate 1
    val = dynamics.neutral_time_integral(netgraph.complete(2), lambda s: float(s.sum() == 1))
    assert val == pytest.approx(1.0, abs=1e-12)
