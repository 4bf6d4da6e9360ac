import numpy as np
import pytest
from hypothesis import given, strategies as st

from mlfgm.graph import (
    Assignment,
    MultiLayerGraph,
    ValidationError,
    build_edge_incidence,
    build_incidences,
    build_inter_edge_incidence,
    build_layer_incidence,
    complete_digraph,
    pad_graph,
)


def test_two_edge_incidence():
    g = MultiLayerGraph(2, 1, [(0, 1), (1, 0)])
    G, H = build_edge_incidence(g)
    np.testing.assert_array_equal(G, [[1, 0], [0, 1]])
    np.testing.assert_array_equal(H, [[0, 1], [1, 0]])


def test_no_edges_gives_empty_incidence():
    G, H = build_edge_incidence(MultiLayerGraph(3, 2, np.zeros((0, 2), dtype=int)))
    assert G.shape == (3, 0) and H.shape == (3, 0)


def test_complete_four_vertex_incidence():
    G, H = build_edge_incidence(MultiLayerGraph(4, 1, complete_digraph(4)))
    assert G.shape == H.shape == (4, 12)
    np.testing.assert_array_equal(G.sum(axis=0), 1)
    np.testing.assert_array_equal(H.sum(axis=0), 1)
    np.testing.assert_array_equal((G + H).sum(axis=0), 2)


def test_layer_incidence_single_layer():
    LGi, LHi, LGt, LHt = build_layer_incidence(1)
    np.testing.assert_array_equal(LGi, [[1]])
    np.testing.assert_array_equal(LHi, [[1]])
    assert LGt.shape == (1, 0) and LHt.shape == (1, 0)


def test_layer_incidence_two_layers():
    LGi, LHi, LGt, LHt = build_layer_incidence(2)
    np.testing.assert_array_equal(LGi, np.eye(2))
    np.testing.assert_array_equal(LHi, np.eye(2))
    np.testing.assert_array_equal(LGt, [[1, 0], [0, 1]])
    np.testing.assert_array_equal(LHt, [[0, 1], [1, 0]])


def test_layer_incidence_three_layers_one_hot():
    _, _, LGt, LHt = build_layer_incidence(3)
    assert LGt.shape == LHt.shape == (3, 6)
    np.testing.assert_array_equal(LGt.sum(axis=0), 1)
    np.testing.assert_array_equal(LHt.sum(axis=0), 1)
    # no pair links a layer to itself
    assert not np.any(LGt * LHt)


def test_layer_incidence_rejects_zero():
    with pytest.raises(ValidationError):
        build_layer_incidence(0)


def test_inter_incidence_default_is_identity():
    Gt, Ht = build_inter_edge_incidence(MultiLayerGraph(3, 2, complete_digraph(3)))
    np.testing.assert_array_equal(Gt, np.eye(3))
    np.testing.assert_array_equal(Ht, np.eye(3))


def test_inter_incidence_custom_pair():
    g = MultiLayerGraph(3, 2, complete_digraph(3), inter_pairs=[(0, 1)])
    Gt, Ht = build_inter_edge_incidence(g)
    np.testing.assert_array_equal(Gt, [[1], [0], [0]])
    np.testing.assert_array_equal(Ht, [[0], [1], [0]])


def test_default_coupling_constraint_is_hadamard_square(rng):
    g = MultiLayerGraph(5, 2, complete_digraph(5))
    Gt, Ht = build_inter_edge_incidence(g)
    X = rng.random((5, 5))
    Z = (Gt.T @ X @ Gt) * (Ht.T @ X @ Ht)
    np.testing.assert_allclose(Z, X * X, rtol=0, atol=1e-15)


@given(st.integers(1, 6), st.integers(1, 4), st.floats(0.0, 1.0), st.integers(0, 2**32 - 1))
def test_incidence_columns_one_hot(n, n_layers, density, seed):
    rng = np.random.default_rng(seed)
    edges = complete_digraph(n)
    edges = edges[rng.random(len(edges)) < density]
    g = MultiLayerGraph(n, n_layers, edges)
    inc = build_incidences(g, g)
    for M in (inc.G1i, inc.H1i, inc.G1t, inc.H1t, inc.LGi, inc.LHi, inc.LGt, inc.LHt):
        assert set(np.unique(M)) <= {0.0, 1.0}
        np.testing.assert_array_equal(M.sum(axis=0), 1)


def test_graph_validation():
    with pytest.raises(ValidationError):
        MultiLayerGraph(2, 1, [(0, 2)])
    with pytest.raises(ValidationError):
        MultiLayerGraph(2, 1, [(1, 1)])
    with pytest.raises(ValidationError):
        MultiLayerGraph(2, 1, [(0, 1), (0, 1)])
    with pytest.raises(ValidationError):
        MultiLayerGraph(2, 0, [(0, 1)])


def test_graph_arrays_read_only():
    g = MultiLayerGraph(2, 1, [(0, 1)], edge_attrs=[[0.5]])
    with pytest.raises(ValueError):
        g.intra_edges[0, 0] = 1
    with pytest.raises(ValueError):
        g.edge_attrs[0, 0, 0] = 0.0


def test_pad_graph_keeps_edges():
    g = MultiLayerGraph(3, 2, complete_digraph(3), edge_attrs=np.ones((2, 6)))
    p = pad_graph(g, 5)
    assert p.n_vertices == 5
    np.testing.assert_array_equal(p.intra_edges, g.intra_edges)


def test_assignment_validation():
    Assignment(np.full((3, 3), 1 / 3))
    with pytest.raises(ValidationError):
        Assignment(np.full((2, 2), 0.7))
    with pytest.raises(ValidationError):
        Assignment(np.full((2, 2), 0.5), "binary")
    with pytest.raises(ValidationError):
        Assignment(np.array([[-0.5, 0.0], [0.0, 1.0]]))


@given(st.permutations(list(range(6))))
def test_permutation_round_trip(perm):
    X = Assignment.from_permutation(perm)
    np.testing.assert_array_equal(X.to_permutation(), perm)
    np.testing.assert_array_equal(X.matrix.sum(axis=0), 1)
