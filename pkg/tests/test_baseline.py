import numpy as np
import pytest

from mlfgm.affinity import KernelConfig, LayerAffinities, MatchingProblem, build_layer_affinities
from mlfgm.baseline import (
    SingleLayerFGM,
    SingleLayerProblem,
    brute_force_qap,
    build_single_layer,
    spectral_match,
)
from mlfgm.factorization import build_factorized_problem
from mlfgm.graph import MultiLayerGraph, ValidationError, complete_digraph
from mlfgm.objective import ObjectiveContext, QuadraticModel, f_gm
from mlfgm.solver import permutation_matrix
from mlfgm.synthetic import accuracy
from mlfgm.verify import random_problem


def _lawler(Kp, Kq, g1, g2):
    n1, n2 = g1.n_vertices, g2.n_vertices
    K = np.zeros((n1 * n2, n1 * n2))
    for e1, (i, j) in enumerate(g1.intra_edges):
        for e2, (a, b) in enumerate(g2.intra_edges):
            K[i + n1 * a, j + n1 * b] += Kq[e1, e2]
    for i in range(n1):
        for a in range(n2):
            K[i + n1 * a, i + n1 * a] += Kp[i, a]
    return K


def test_unary_only_is_diagonal(rng):
    g = MultiLayerGraph(3, 1, np.zeros((0, 2), dtype=int))
    Kp = rng.random((3, 3))
    sl = build_single_layer(Kp, np.zeros((0, 0)), g, g)
    np.testing.assert_array_equal(sl.K, np.diag(Kp.reshape(-1, order="F")))


def test_single_layer_is_symmetrized_lawler(rng):
    prob = random_problem(rng, 4, n_layers=1, unary=True, density=0.7)
    aff = prob.affinities
    sl = build_single_layer(aff.Kp[0], aff.Kqi[0], prob.g1, prob.g2)
    L = _lawler(aff.Kp[0], aff.Kqi[0], prob.g1, prob.g2)
    np.testing.assert_allclose(sl.K, 0.5 * (L + L.T), rtol=1e-15)
    np.testing.assert_allclose(sl.K, sl.K.T, atol=1e-9)
    x = rng.random(16)
    assert x @ sl.K @ x == pytest.approx(x @ L @ x, rel=1e-12)


def test_summed_layers_match_per_layer_objective(rng):
    prob = random_problem(rng, 4, n_layers=2, unary=True)
    aff = prob.affinities
    sl = build_single_layer(aff.Kp.sum(axis=0), aff.Kqi.sum(axis=0), prob.g1, prob.g2)
    fp = build_factorized_problem(prob)
    for _ in range(10):
        # binary X keeps the linear and quadratic unary forms equal
        X = permutation_matrix(rng.permutation(4))
        per_layer = sum(f_gm(X, ObjectiveContext(fp, np.eye(2)[k])) for k in range(2))
        assert sl.score(X) == pytest.approx(per_layer, rel=1e-10)


def test_spectral_dominant_diagonal():
    # strong diagonal entries at candidates (0,1), (1,2), (2,0)
    perm = [1, 2, 0]
    Kp = np.full((3, 3), 0.1)
    Kp[np.arange(3), perm] = [3.0, 2.0, 1.0]
    g = MultiLayerGraph(3, 1, np.zeros((0, 2), dtype=int))
    res = spectral_match(build_single_layer(Kp, np.zeros((0, 0)), g, g))
    np.testing.assert_array_equal(res.assignment.to_permutation(), perm)
    assert res.converged


def test_spectral_identity_tie_break():
    res = spectral_match(SingleLayerProblem(np.eye(9), 3, 3))
    np.testing.assert_array_equal(res.assignment.matrix, np.eye(3))


def _self_pair(n, n_layers, rng):
    edges = complete_digraph(n)
    g = MultiLayerGraph(n, n_layers, edges, edge_attrs=rng.random((n_layers, len(edges))))
    aff = build_layer_affinities(g, g, KernelConfig(omega=(1.0,) * n_layers))
    return MatchingProblem(g, g, aff, ground_truth=np.arange(n))


def test_spectral_self_matching(rng):
    prob = _self_pair(8, 1, rng)
    sl = build_single_layer(prob.affinities.Kp[0], prob.affinities.Kqi[0], prob.g1, prob.g2)
    assert accuracy(spectral_match(sl).assignment, prob.ground_truth) == 1.0


def test_brute_force_single_vertex():
    g = MultiLayerGraph(1, 1, np.zeros((0, 2), dtype=int))
    aff = LayerAffinities(np.array([[[2.0]]]), np.zeros((1, 0, 0)), np.zeros((0, 1, 1)))
    X, value = brute_force_qap(build_factorized_problem(MatchingProblem(g, g, aff)))
    np.testing.assert_array_equal(X.matrix, [[1.0]])
    assert value == 2.0


def test_brute_force_self_matching(rng):
    X, _ = brute_force_qap(build_factorized_problem(_self_pair(3, 2, rng)))
    np.testing.assert_array_equal(X.matrix, np.eye(3))


def test_brute_force_beats_random_permutations(rng):
    fp = build_factorized_problem(random_problem(rng, 5, n_layers=2))
    _, best = brute_force_qap(fp)
    ctx = ObjectiveContext(fp, [0.5, 0.5])
    for _ in range(100):
        assert best >= f_gm(permutation_matrix(rng.permutation(5)), ctx) - 1e-12


def test_brute_force_single_layer_problem(rng):
    prob = random_problem(rng, 4, n_layers=1)
    sl = build_single_layer(prob.affinities.Kp[0], prob.affinities.Kqi[0], prob.g1, prob.g2)
    X, value = brute_force_qap(sl)
    assert value == pytest.approx(sl.score(X))


def test_brute_force_refuses_large(rng):
    fp = build_factorized_problem(random_problem(rng, 9, n_layers=1, density=0.2))
    with pytest.raises(ValidationError):
        brute_force_qap(fp)


def test_single_layer_model_matches_multilayer_model(rng):
    prob = random_problem(rng, 5, n_layers=1, unary=True)
    aff = prob.affinities
    ref = QuadraticModel(build_factorized_problem(prob))
    ref.set_confidence([1.0])
    model = SingleLayerFGM(aff.Kp[0], aff.Kqi[0], prob.g1, prob.g2)
    np.testing.assert_allclose(model.linear, ref.linear, rtol=1e-13)
    np.testing.assert_allclose(model.Q_gm, ref.Q_gm, rtol=1e-10, atol=1e-12)
    np.testing.assert_allclose(model.Q_con, ref.Q_con, rtol=1e-10, atol=1e-12)
