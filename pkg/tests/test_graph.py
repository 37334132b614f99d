import numpy as np
import pytest
from hypothesis import given, strategies as st

from mlnc.graph import Graph, normalize_adjacency, spmm

from conftest import random_graph, two_node_graph


def dense_normalized(graph):
    a = graph.to_dense_adjacency() + np.eye(graph.num_nodes)
    d = 1.0 / np.sqrt(a.sum(axis=1))
    return d[:, None] * a * d[None, :]


def test_two_node_all_half():
    adj = normalize_adjacency(two_node_graph())
    np.testing.assert_array_equal(adj.to_dense(), np.full((2, 2), 0.5))


def test_isolated_node_is_self_loop():
    g = Graph.from_edges(1, [], [[1.0]], [[1]])
    np.testing.assert_array_equal(normalize_adjacency(g).to_dense(), [[1.0]])


def test_path_graph_hand_values():
    g = Graph.from_edges(3, [(0, 1), (1, 2)], np.zeros((3, 1)), np.zeros((3, 1)))
    a = normalize_adjacency(g).to_dense()
    assert a[0, 1] == pytest.approx(0.4082482904638631, abs=1e-12)  # 1/sqrt(2*3)
    assert a[1, 1] == pytest.approx(1 / 3, abs=1e-15)
    assert a[0, 2] == 0.0


def test_csr_sorted_and_diagonal_present():
    g = random_graph(np.random.default_rng(3), 20)
    adj = normalize_adjacency(g)
    for i in range(g.num_nodes):
        cols = adj.indices[adj.indptr[i]:adj.indptr[i + 1]]
        assert np.all(np.diff(cols) > 0)
        assert i in cols
    assert np.all(adj.to_dense().diagonal() > 0)


@given(n=st.integers(1, 32), p=st.floats(0, 1), seed=st.integers(0, 2**31))
def test_normalize_matches_dense_formula(n, p, seed):
    g = random_graph(np.random.default_rng(seed), n, p=p)
    dense = normalize_adjacency(g).to_dense()
    np.testing.assert_allclose(dense, dense_normalized(g), rtol=0, atol=1e-12)
    np.testing.assert_array_equal(dense, dense.T)


def test_spmm_identity():
    g = Graph.from_edges(4, [], np.zeros((4, 1)), np.zeros((4, 1)))
    x = np.arange(12.0).reshape(4, 3)
    np.testing.assert_array_equal(spmm(normalize_adjacency(g), x), x)


def test_spmm_two_node():
    out = spmm(normalize_adjacency(two_node_graph()), np.array([[2.0], [0.0]]))
    np.testing.assert_array_equal(out, [[1.0], [1.0]])


@given(seed=st.integers(0, 2**31), h=st.integers(1, 5), n=st.integers(1, 16))
def test_spmm_matches_dense_matmul(seed, h, n):
    rng = np.random.default_rng(seed)
    g = random_graph(rng, n)
    adj = normalize_adjacency(g)
    x = rng.normal(size=(n, h))
    expect = adj.to_dense() @ x
    np.testing.assert_allclose(spmm(adj, x), expect, rtol=1e-12, atol=1e-15)


def test_spmm_8x8_random():
    rng = np.random.default_rng(8)
    g = random_graph(rng, 8, p=0.4)
    adj = normalize_adjacency(g)
    x = rng.normal(size=(8, 3))
    np.testing.assert_allclose(spmm(adj, x), adj.to_dense() @ x, rtol=1e-12)


def test_spmm_dimension_mismatch():
    with pytest.raises(ValueError):
        spmm(normalize_adjacency(two_node_graph()), np.ones((3, 1)))


def test_graph_invariants_rejected():
    with pytest.raises(ValueError, match="binary"):
        Graph.from_edges(2, [], [[0.0], [0.0]], [[2], [0]])
    with pytest.raises(ValueError, match="symmetric"):
        Graph(np.array([0, 1, 1]), np.array([1]), np.zeros((2, 1)), np.zeros((2, 1), np.int8))
    with pytest.raises(ValueError, match="out of range"):
        Graph.from_edges(2, [(0, 5)], [[0.0], [0.0]], [[0], [0]])


def test_from_edges_symmetrizes_dedups_and_drops_self_loops():
    g = Graph.from_edges(3, [(0, 1), (1, 0), (0, 1), (2, 2), (1, 2)],
                         np.zeros((3, 1)), np.zeros((3, 1)))
    assert g.num_edges == 2
    assert g.num_arcs == 4
    np.testing.assert_array_equal(g.to_dense_adjacency(), g.to_dense_adjacency().T)


def test_graph_is_immutable(fixture_graph):
    with pytest.raises(ValueError):
        fixture_graph.features[0, 0] = 1.0
