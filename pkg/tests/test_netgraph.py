from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from opinionfix import netgraph
from opinionfix.errors import (
    AsymmetricDuplicate,
    Disconnected,
    InvalidK,
    InvalidParams,
    NonPositiveWeight,
    SelfLoop,
    TooSmall,
    ValidationError,
)


@st.composite
def connected_graphs(draw, max_n=9, weighted=True):
    n = draw(st.integers(2, max_n))
    seed = draw(st.integers(0, 2**31))
    p = draw(st.floats(0.0, 0.8))
    return netgraph.random_connected(n, p, seed, weighted=weighted and draw(st.booleans()))


# -- construction and validation -----------------------------------------------

def test_single_edge_is_k2():
    g = netgraph.from_edge_list([(0, 1, 1.0)])
    assert g.n == 2
    assert list(g.strength) == [1.0, 1.0]
    assert g.total_weight == 2.0
    assert g.step_matrix()[0, 1] == 1.0


def test_triangle_probabilities():
    g = netgraph.from_edge_list([(0, 1, 1), (1, 2, 1), (0, 2, 1)])
    np.testing.assert_allclose(g.stationary, [1 / 3] * 3)
    p = g.step_matrix()
    assert all(p[i, j] == 0.5 for i in range(3) for j in range(3) if i != j)


def test_self_loop_rejected():
    with pytest.raises(SelfLoop) as err:
        netgraph.from_edge_list([(0, 0, 1)])
    assert err.value.exit_code == 2


def test_asymmetric_duplicate_rejected():
    with pytest.raises(AsymmetricDuplicate):
        netgraph.from_edge_list([(0, 1, 1.0), (1, 0, 2.0)])
    # a consistent repeat is harmless
    assert netgraph.from_edge_list([(0, 1, 1.0), (1, 0, 1.0)]).num_edges == 1


def test_nonpositive_weight_rejected():
    with pytest.raises(NonPositiveWeight):
        netgraph.from_edge_list([(0, 1, 0.0)])
    with pytest.raises(NonPositiveWeight):
        netgraph.from_edge_list([(0, 1, -1.0)])


def test_disconnected_lists_components():
    with pytest.raises(Disconnected) as err:
        netgraph.from_edge_list([(0, 1, 1), (2, 3, 1)])
    assert "[0, 1]" in str(err.value) and "[2, 3]" in str(err.value)
    with pytest.raises(Disconnected):
        netgraph.from_edge_list([(0, 1, 1)], n=3)


def test_too_small():
    with pytest.raises(TooSmall):
        netgraph.complete(1)
    with pytest.raises(ValidationError):
        netgraph.from_edge_list([])


def test_index_out_of_range():
    with pytest.raises(ValidationError):
        netgraph.from_edge_list([(0, 5, 1)], n=3)
    with pytest.raises(ValidationError):
        netgraph.from_edge_list([(-1, 1, 1)])


# -- generators ----------------------------------------------------------------------

def test_complete_counts():
    g3 = netgraph.complete(3)
    assert g3.total_weight == 6
    np.testing.assert_allclose(g3.stationary, [1 / 3] * 3)
    g2 = netgraph.complete(2)
    lazy = g2.neutral_step_matrix()
    assert lazy[0, 1] == 0.5 and lazy[0, 0] == 0.5
    g50 = netgraph.complete(50)
    assert g50.total_weight == 50 * 49
    assert g50.num_edges == 1225


def test_newman_watts_without_shortcuts_is_lattice():
    g = netgraph.newman_watts(10, 4, 0.0, seed=3)
    assert g.num_edges == 20
    assert set(g.degree) == {4}
    assert all((j - i) % 10 in (1, 2, 8, 9) for i, j, _ in g.edges())


def test_newman_watts_full_shortcuts():
    g = netgraph.newman_watts(10, 4, 1.0, seed=1)
    assert g.num_edges == 40
    lattice = {(i, j) for i, j, _ in netgraph.newman_watts(10, 4, 0.0, 1).edges()}
    assert lattice <= {(i, j) for i, j, _ in g.edges()}


def test_newman_watts_invalid_k():
    with pytest.raises(InvalidK):
        netgraph.newman_watts(3, 4, 0.5, 1)
    with pytest.raises(InvalidK):
        netgraph.newman_watts(10, 3, 0.5, 1)
    with pytest.raises(InvalidParams):
        netgraph.newman_watts(10, 4, 1.5, 1)


def test_newman_watts_fig_parameters_connected():
    g = netgraph.newman_watts(50, 8, 0.4, seed=1)
    assert g.n == 50 and g.num_edges > 200
    assert g.is_unweighted()


def test_barabasi_albert_counts():
    assert netgraph.barabasi_albert(50, 3, 3, seed=1).num_edges == 144
    assert netgraph.barabasi_albert(4, 3, 3, seed=0) == netgraph.complete(4)
    g = netgraph.barabasi_albert(10, 3, 1, seed=7)
    assert g.num_edges == 10


def test_barabasi_albert_invalid():
    with pytest.raises(InvalidParams):
        netgraph.barabasi_albert(10, 3, 4, 1)
    with pytest.raises(InvalidParams):
        netgraph.barabasi_albert(3, 3, 2, 1)
    with pytest.raises(InvalidParams):
        netgraph.barabasi_albert(10, 1, 1, 1)


@pytest.mark.parametrize("make", [
    lambda s: netgraph.newman_watts(30, 6, 0.3, s),
    lambda s: netgraph.barabasi_albert(30, 3, 2, s),
    lambda s: netgraph.random_connected(12, 0.3, s, weighted=True),
])
def test_generators_deterministic(make):
    assert make(17) == make(17)
    assert netgraph.write_edge_list(make(17)) == netgraph.write_edge_list(make(17))


# -- edge-list format --------------------------------------------------------------

def test_k2_edge_list_text():
    assert netgraph.write_edge_list(netgraph.complete(2)) == "0 1 1\n"


def test_round_trip_ba():
    g = netgraph.barabasi_albert(50, 3, 3, seed=4)
    assert netgraph.read_edge_list(netgraph.write_edge_list(g, ["header"])) == g


def test_malformed_self_loop_line():
    with pytest.raises(SelfLoop):
        netgraph.read_edge_list("0 1 1\n0 0 1\n")
    with pytest.raises(ValidationError):
        netgraph.read_edge_list("0 1 x\n")


def test_save_load(tmp_path):
    g = netgraph.random_connected(9, 0.3, seed=2, weighted=True)
    netgraph.save(g, tmp_path / "g.edges", header=["test"])
    assert netgraph.load(tmp_path / "g.edges") == g


@given(connected_graphs())
def test_round_trip_exact(g):
    h = netgraph.read_edge_list(netgraph.write_edge_list(g))
    assert h == g
    assert h.content_hash() == g.content_hash()


# -- random-walk invariants --------------------------------------------------------

@given(connected_graphs())
def test_stochastic_invariants(g):
    p = g.step_matrix()
    assert np.max(np.abs(p.sum(axis=1) - 1)) <= 1e-12
    assert abs(g.stationary.sum() - 1) <= 1e-12
    lazy = g.neutral_step_matrix()
    assert np.max(np.abs(lazy.sum(axis=1) - 1)) <= 1e-12
    flow = g.stationary[:, None] * p
    assert np.max(np.abs(flow - flow.T)) <= 1e-15


@given(connected_graphs(max_n=7))
def test_reversibility_rational(g):
    # exact arithmetic on the stored float weights
    w = [[Fraction(0)] * g.n for _ in range(g.n)]
    for i, j, x in g.edges():
        w[i][j] = w[j][i] = Fraction(x)
    strength = [sum(row) for row in w]
    total = sum(strength)
    for i in range(g.n):
        for j in range(g.n):
            if w[i][j]:
                assert strength[i] / total * (w[i][j] / strength[i]) == \
                    strength[j] / total * (w[j][i] / strength[j])


@given(connected_graphs(), st.floats(0.01, 100.0))
def test_weight_scaling(g, lam):
    h = g.scaled(lam)
    np.testing.assert_allclose(h.step_matrix(), g.step_matrix(), rtol=1e-13, atol=0)
    np.testing.assert_allclose(h.stationary, g.stationary, rtol=1e-13)
    np.testing.assert_allclose(h.neutral_step_matrix(), g.neutral_step_matrix(), rtol=1e-13)
    assert h.total_weight == pytest.approx(lam * g.total_weight, rel=1e-13)


def test_star_stationary():
    g = netgraph.star(4)
    assert list(g.strength) == [3, 1, 1, 1]
    assert g.total_weight == 6
    assert g.stationary[0] == 0.5


def test_graph_is_immutable():
    g = netgraph.complete(3)
    with pytest.raises(ValueError):
        g.weights[0] = 2.0
