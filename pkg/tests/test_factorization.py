import numpy as np
import pytest
from hypothesis import given, strategies as st

from mlfgm.affinity import LayerAffinities, MatchingProblem
from mlfgm.factorization import (
    DENSE_LIMIT,
    assemble_dense_supra,
    build_coupling,
    build_factorized_problem,
    dense_storage,
    factorize,
    split_pairwise,
)
from mlfgm.graph import MultiLayerGraph, ValidationError, build_incidences, complete_digraph
from mlfgm.verify import (
    check_footnote_identity,
    check_memory_accounting,
    direct_supra,
    random_problem,
)


def test_split_rank_one(rng):
    u, v = rng.random(5), rng.random(7)
    K = np.outer(u, v)
    U, V = split_pairwise(K)
    assert U.shape == (5, 1) and V.shape == (7, 1)
    np.testing.assert_allclose(U @ V.T, K, rtol=0, atol=1e-12)


def test_split_zero_matrix():
    U, V = split_pairwise(np.zeros((4, 6)))
    assert U.shape == (4, 0) and V.shape == (6, 0)


def test_split_random_reconstruction(rng):
    K = rng.random((6, 10))
    U, V = split_pairwise(K)
    assert np.linalg.norm(K - U @ V.T) / np.linalg.norm(K) <= 1e-9


def test_split_rejects_non_finite():
    with pytest.raises(ValidationError):
        split_pairwise(np.array([[1.0, np.inf]]))


@given(st.integers(1, 8), st.integers(1, 8), st.integers(0, 2**32 - 1))
def test_split_reconstructs(m, n, seed):
    K = np.random.default_rng(seed).random((m, n))
    U, V = split_pairwise(K)
    assert np.abs(U @ V.T - K).max() <= 1e-12 * max(1.0, np.abs(K).max()) * 10


def _incidences(n, n_layers):
    g = MultiLayerGraph(n, n_layers, complete_digraph(n))
    return build_incidences(g, g)


def test_coupling_uniform_two_layers():
    c = build_coupling([0.5, 0.5], _incidences(3, 2))
    np.testing.assert_allclose(c.lam_i, [0.25, 0.25])
    np.testing.assert_allclose(c.lam_t, [0.25, 0.25])


def test_coupling_one_layer_switched_off():
    c = build_coupling([1.0, 0.0], _incidences(3, 2))
    np.testing.assert_allclose(c.lam_i, [1.0, 0.0])
    np.testing.assert_allclose(c.lam_t, [0.0, 0.0])


def test_coupling_single_layer():
    c = build_coupling([0.7], _incidences(3, 1))
    np.testing.assert_allclose(c.lam_i, [0.49])
    assert c.lam_t.size == 0


def test_coupling_three_layers_pair_products(rng):
    lc = rng.random(3)
    c = build_coupling(lc, _incidences(2, 3))
    pairs = [(a, b) for a in range(3) for b in range(3) if a != b]
    np.testing.assert_allclose(c.lam_t, [lc[a] * lc[b] for a, b in pairs], rtol=1e-15)
    np.testing.assert_allclose(c.Lambda_i, np.outer(lc, lc), rtol=1e-15)


def test_coupling_hadamard_weights(rng):
    lc = rng.random(3)
    inc = _incidences(2, 3)
    c = build_coupling(lc, inc)
    np.testing.assert_allclose(c.Wi, (lc @ inc.LGi) * (lc @ inc.LHi))
    np.testing.assert_allclose(c.Wt, (lc @ inc.LGt) * (lc @ inc.LHt))


def test_factorized_shapes(rng):
    fp = build_factorized_problem(random_problem(rng, 4, n_layers=2))
    assert fp.A1.shape == (fp.rank_i, 4, 4)
    assert fp.A2.shape == (fp.rank_i, 2, 4, 4)
    assert fp.B1.shape == (fp.rank_t, 4, 4)


def test_factor_definitions(rng):
    fp = build_factorized_problem(random_problem(rng, 4, n_layers=2, density=0.6))
    inc = fp.incidences
    m2 = fp.affinities.Kqi.shape[2]
    for m in range(fp.rank_i):
        np.testing.assert_allclose(fp.A1[m], inc.G1i @ np.diag(fp.U[:, m]) @ inc.H1i.T)
        for n in range(2):
            v = fp.V[n * m2:(n + 1) * m2, m]
            np.testing.assert_allclose(fp.A2[m, n], inc.G2i @ np.diag(v) @ inc.H2i.T)


def test_single_layer_has_no_inter_terms(rng):
    fp = build_factorized_problem(random_problem(rng, 3, n_layers=1))
    assert fp.rank_t == 0 and fp.B1.shape[0] == 0 and fp.B2.shape[0] == 0


def test_factorization_requires_square(rng):
    with pytest.raises(ValidationError):
        build_factorized_problem(random_problem(rng, 3, 4))
    fp, mapping = factorize(random_problem(rng, 3, 4))
    assert fp.shape == (4, 4) and (mapping.n1, mapping.n2) == (3, 4)


def test_dense_zero_affinities():
    g = MultiLayerGraph(3, 2, complete_digraph(3))
    aff = LayerAffinities(np.zeros((2, 3, 3)), np.zeros((2, 6, 6)), np.zeros((2, 3, 3)))
    P = assemble_dense_supra(build_factorized_problem(MatchingProblem(g, g, aff)))
    assert P.shape == (18, 18) and not P.any()


def test_dense_single_candidate():
    g = MultiLayerGraph(1, 1, np.zeros((0, 2), dtype=int))
    aff = LayerAffinities(np.array([[[2.5]]]), np.zeros((1, 0, 0)), np.zeros((0, 1, 1)))
    P = assemble_dense_supra(build_factorized_problem(MatchingProblem(g, g, aff)))
    np.testing.assert_array_equal(P, [[2.5]])


def test_dense_matches_direct_placement(rng):
    prob = random_problem(rng, 4, n_layers=2, unary=True)
    P = assemble_dense_supra(build_factorized_problem(prob))
    np.testing.assert_allclose(P, direct_supra(prob), rtol=0, atol=1e-10)


@given(st.integers(1, 6), st.integers(1, 3), st.booleans(), st.integers(0, 2**32 - 1))
def test_dense_matches_direct_placement_random(n, n_layers, custom, seed):
    rng = np.random.default_rng(seed)
    prob = random_problem(rng, n, n_layers=n_layers, density=rng.uniform(0.2, 1),
                          unary=True, custom_inter=custom)
    P = assemble_dense_supra(build_factorized_problem(prob))
    assert np.abs(P - direct_supra(prob)).max(initial=0.0) <= 1e-10


def test_dense_guard(rng):
    fp = build_factorized_problem(random_problem(rng, 8, n_layers=4))
    assert 4 * 64 > DENSE_LIMIT
    with pytest.raises(ValidationError):
        assemble_dense_supra(fp)


def test_footnote_identity():
    check = check_footnote_identity()
    assert check.passed, check.line()


def test_memory_accounting():
    check = check_memory_accounting()
    assert check.passed, check.line()
    assert dense_storage(6, 3) == (3 * 36) ** 2
