import networkx as nx
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from droopcert.network import (
    DisconnectedError,
    NetworkError,
    build_network,
    connected_components,
    cycle_basis,
    incidence_matrix,
)

from conftest import SQUARE, TRIANGLE


def test_edges_are_canonical_and_sorted():
    net = build_network([1, 2, 3], [(3, 1, 1.0), (2, 1, 2.0), (3, 2, 3.0)])
    assert net.edges == [(0, 1), (0, 2), (1, 2)]
    assert np.array_equal(net.weights, [2.0, 1.0, 3.0])
    assert net.edge_labels == ["1-2", "1-3", "2-3"]


def test_incidence_columns_sum_to_zero():
    net = build_network([1, 2, 3], TRIANGLE)
    B = incidence_matrix(net)
    assert B.shape == (3, 3)
    assert np.all(B.sum(axis=0) == 0)
    assert np.all(B[net.src, np.arange(3)] == 1)


@pytest.mark.parametrize(
    "lines, msg",
    [
        ([(1, 99, 1.0)], "99"),
        ([(1, 1, 1.0)], "self-loop"),
        ([(1, 2, 0.0)], "nonpositive"),
        ([(1, 2, 1.0), (2, 1, 1.0)], "duplicate"),
    ],
)
def test_rejects_bad_lines(lines, msg):
    with pytest.raises(NetworkError, match=msg):
        build_network([1, 2], lines)


def test_edge_index_accepts_labels_pairs_and_ints():
    net = build_network([1, 2, 3], TRIANGLE)
    assert net.edge_index("1-3") == net.edge_index("3-1") == net.edge_index((3, 1)) == 1
    assert net.edge_index(2) == 2
    with pytest.raises(NetworkError):
        net.edge_index("1-9")


def test_triangle_cycle_basis():
    net = build_network([1, 2, 3], TRIANGLE)
    cb = cycle_basis(net)
    assert len(cb) == 1
    assert np.allclose(cb.C @ incidence_matrix(net).T, 0)
    assert set(np.abs(cb.C[0])) == {1.0}


def test_tree_has_empty_basis():
    net = build_network([1, 2, 3], [(1, 2, 1.0), (2, 3, 1.0)])
    assert len(cycle_basis(net)) == 0


def test_disconnected_is_reported_with_components():
    net = build_network([1, 2, 3, 4], [(1, 2, 1.0), (3, 4, 1.0)])
    assert not net.is_connected
    assert connected_components(net) == [[0, 1], [2, 3]]
    with pytest.raises(DisconnectedError, match="2 components"):
        cycle_basis(net)


def test_rts_basis_dimension(rts_model):
    net = rts_model.net
    cb = cycle_basis(net)
    assert (net.n, net.m, len(cb)) == (24, 34, 11)
    assert np.allclose(cb.C @ incidence_matrix(net).T, 0)
    assert np.linalg.matrix_rank(cb.C) == 11


@st.composite
def graphs(draw):
    n = draw(st.integers(2, 8))
    pairs = [(i, j) for i in range(1, n + 1) for j in range(i + 1, n + 1)]
    chosen = draw(st.lists(st.sampled_from(pairs), min_size=1, unique=True))
    return n, [(a, b, 1.0) for a, b in chosen]


@settings(max_examples=60, deadline=None)
@given(graphs())
def test_connectivity_and_cycle_rank_match_networkx(graph):
    n, lines = graph
    net = build_network(list(range(1, n + 1)), lines)
    G = nx.Graph()
    G.add_nodes_from(range(1, n + 1))
    G.add_edges_from((a, b) for a, b, _ in lines)
    assert net.is_connected == nx.is_connected(G)
    assert len(connected_components(net)) == nx.number_connected_components(G)
    if net.is_connected:
        cb = cycle_basis(net)
        assert len(cb) == net.m - net.n + 1
        assert np.allclose(cb.C @ incidence_matrix(net).T, 0)
        if len(cb):
            assert np.linalg.matrix_rank(cb.C) == len(cb)
