from itertools import permutations

import numpy as np
import pytest
from hypothesis import given, strategies as st

from mlfgm.affinity import LayerAffinities, MatchingProblem
from mlfgm.factorization import assemble_dense_supra, build_factorized_problem
from mlfgm.graph import MultiLayerGraph, ValidationError, complete_digraph
from mlfgm.objective import (
    ObjectiveContext,
    QuadraticModel,
    f_cav,
    f_con,
    f_gm,
    f_gm_dense,
    f_theta,
    f_vex,
    grad_f_con,
    grad_f_gm,
    grad_f_theta,
)
from mlfgm.solver import permutation_matrix
from mlfgm.verify import (
    check_definiteness,
    check_relaxation_identities,
    check_unary_residual,
    fd_gradient_error,
    random_problem,
)

seeds = st.integers(0, 2**32 - 1)


def _setup(seed, n=None, n_layers=None, unary=False, custom=None):
    rng = np.random.default_rng(seed)
    n = n or int(rng.integers(1, 6))
    n_layers = n_layers or int(rng.integers(1, 4))
    custom = bool(rng.integers(2)) if custom is None else custom
    prob = random_problem(rng, n, n_layers=n_layers, density=rng.uniform(0.3, 1.0),
                          unary=unary, custom_inter=custom)
    return rng, build_factorized_problem(prob)


def test_dense_zero_assignment_and_confidence(small_problem):
    P = assemble_dense_supra(small_problem)
    assert f_gm_dense(np.zeros((4, 4)), [0.3, 0.7], P) == 0
    assert f_gm_dense(np.full((4, 4), 0.25), [0.0, 0.0], P) == 0


def test_dense_quadratic_in_confidence(small_problem, rng):
    P = assemble_dense_supra(small_problem)
    X, lc = rng.random((4, 4)), rng.random(2)
    assert f_gm_dense(X, 3.0 * lc, P) == pytest.approx(9.0 * f_gm_dense(X, lc, P), rel=1e-12)


def test_dense_rejects_mismatched_size(small_problem):
    with pytest.raises(ValidationError):
        f_gm_dense(np.eye(4), [1.0], assemble_dense_supra(small_problem))


@given(seeds)
def test_factorized_equals_dense_without_unary(seed):
    rng, fp = _setup(seed)
    lc = rng.random(fp.n_layers)
    X = rng.random(fp.shape)
    dense = f_gm_dense(X, lc, assemble_dense_supra(fp))
    assert abs(f_gm(X, ObjectiveContext(fp, lc)) - dense) <= 1e-8 * max(1.0, abs(dense))


def test_unary_residual_is_exact():
    check = check_unary_residual()
    assert check.passed, check.line()


def test_single_layer_reduction(rng):
    fp = build_factorized_problem(random_problem(rng, 4, n_layers=1, unary=True))
    lc = np.array([0.6])
    X = rng.random((4, 4))
    Kp = fp.affinities.Kp[0]
    expected = np.trace(Kp.T @ X) * lc[0] + lc[0] ** 2 * sum(
        np.trace(fp.A1[m].T @ X @ fp.A2[m, 0] @ X.T) for m in range(fp.rank_i)
    )
    assert f_gm(X, ObjectiveContext(fp, lc)) == pytest.approx(expected, rel=1e-12)


def test_zero_assignment_values():
    _, fp = _setup(3, n=4, n_layers=2)
    ctx = ObjectiveContext(fp, [0.5, 0.5])
    Z = np.zeros((4, 4))
    for f in (f_gm, f_con, f_vex, f_cav):
        assert f(Z, ctx) == 0


def test_con_at_identity():
    _, fp = _setup(5, n=4, n_layers=3)
    lc = np.array([0.2, 0.3, 0.5])
    ctx = ObjectiveContext(fp, lc)
    lam_i, lam_t = ctx.coupling.lam_i, ctx.coupling.lam_t
    expected = 0.0
    for m in range(fp.rank_i):
        for n in range(3):
            expected += lam_i[n] * (np.linalg.norm(fp.A1[m]) ** 2 + np.linalg.norm(fp.A2[m, n]) ** 2)
    for m in range(fp.rank_t):
        for n in range(len(lam_t)):
            expected += lam_t[n] * (np.linalg.norm(fp.B1[m]) ** 2 + np.linalg.norm(fp.B2[m, n]) ** 2)
    assert f_con(np.eye(4), ctx) == pytest.approx(expected, rel=1e-12)


def test_relaxation_identity_suite():
    for check in check_relaxation_identities():
        assert check.passed, check.line()


@given(seeds)
def test_vex_plus_cav(seed):
    rng, fp = _setup(seed, unary=True)
    ctx = ObjectiveContext(fp, rng.random(fp.n_layers))
    X = rng.random(fp.shape)
    gm = f_gm(X, ctx)
    assert abs(f_vex(X, ctx) + f_cav(X, ctx) - 2 * gm) <= 1e-9 * max(1.0, abs(gm))


@given(seeds)
def test_cav_differences_match_gm_on_permutations(seed):
    rng, fp = _setup(seed, n=5)
    ctx = ObjectiveContext(fp, rng.random(fp.n_layers))
    X1, X2 = (permutation_matrix(rng.permutation(5)) for _ in range(2))
    d_cav = f_cav(X1, ctx) - f_cav(X2, ctx)
    d_gm = f_gm(X1, ctx) - f_gm(X2, ctx)
    assert abs(d_cav - d_gm) <= 1e-9 * max(1.0, abs(f_cav(X1, ctx)))


@given(seeds, st.floats(0, 1))
def test_theta_interpolates(seed, theta):
    rng, fp = _setup(seed, unary=True)
    ctx = ObjectiveContext(fp, rng.random(fp.n_layers), theta)
    X = rng.random(fp.shape)
    expected = (1 - theta) * f_vex(X, ctx) + theta * f_cav(X, ctx)
    assert f_theta(X, ctx) == pytest.approx(expected, rel=1e-10, abs=1e-10)


def test_theta_endpoints(small_problem, rng):
    X = rng.random((4, 4))
    ctx = ObjectiveContext(small_problem, [0.4, 0.6])
    assert f_theta(X, ctx.with_theta(0.0)) == pytest.approx(f_vex(X, ctx), rel=1e-12)
    assert f_theta(X, ctx.with_theta(1.0)) == pytest.approx(f_cav(X, ctx), rel=1e-12)
    avg = 0.5 * (abs(f_vex(X, ctx)) + abs(f_cav(X, ctx)))
    assert abs(f_theta(X, ctx.with_theta(0.5)) - f_gm(X, ctx)) <= 1e-12 * max(1.0, avg)


def test_theta_range_checked(small_problem):
    with pytest.raises(ValidationError):
        ObjectiveContext(small_problem, [0.5, 0.5], 1.5)


def test_gradient_zero_for_zero_affinities(rng):
    g = MultiLayerGraph(3, 2, complete_digraph(3))
    aff = LayerAffinities(np.zeros((2, 3, 3)), np.zeros((2, 6, 6)), np.zeros((2, 3, 3)))
    fp = build_factorized_problem(MatchingProblem(g, g, aff))
    G = grad_f_theta(rng.random((3, 3)), ObjectiveContext(fp, [0.5, 0.5], 0.3))
    assert not G.any()


@given(seeds, st.floats(0, 1))
def test_gradient_finite_differences(seed, theta):
    rng, fp = _setup(seed, unary=True)
    ctx = ObjectiveContext(fp, rng.random(fp.n_layers), theta)
    assert fd_gradient_error(ctx, rng.random(fp.shape)) < 1e-5


def test_gradient_at_midpoint_is_gm_gradient(small_problem, rng):
    X = rng.random((4, 4))
    ctx = ObjectiveContext(small_problem, [0.3, 0.7], 0.5)
    np.testing.assert_allclose(grad_f_theta(X, ctx), grad_f_gm(X, ctx), rtol=1e-14)


def test_hessian_signs():
    check = check_definiteness()
    assert check.passed, check.line()


@given(seeds, st.floats(0.1, 10))
def test_confidence_scaling(seed, s):
    # with no unary affinities every term is quadratic in the confidence
    rng, fp = _setup(seed, n=4)
    lc = rng.random(fp.n_layers)
    X = rng.random(fp.shape)
    for f in (f_gm, f_con, f_vex, f_cav, f_theta):
        base = f(X, ObjectiveContext(fp, lc, 0.3))
        scaled = f(X, ObjectiveContext(fp, s * lc, 0.3))
        assert scaled == pytest.approx(s * s * base, rel=1e-10, abs=1e-12)


def test_scaling_keeps_permutation_argmax(rng):
    fp = build_factorized_problem(random_problem(rng, 5, n_layers=2))
    lc = rng.random(2)
    perms = list(permutations(range(5)))

    def best(scale):
        ctx = ObjectiveContext(fp, scale * lc)
        return max(perms, key=lambda p: f_gm(permutation_matrix(p), ctx))

    assert best(1.0) == best(4.0)


@given(seeds, st.floats(0, 1))
def test_quadratic_model_matches_objective(seed, theta):
    rng, fp = _setup(seed, unary=True)
    lc = rng.random(fp.n_layers)
    model = QuadraticModel(fp)
    model.set_confidence(lc)
    X = rng.random(fp.shape)
    x = X.reshape(-1, order="F")
    ctx = ObjectiveContext(fp, lc, theta)
    assert model.value(x, theta) == pytest.approx(f_theta(X, ctx), rel=1e-9, abs=1e-9)
    assert model.gm(x) == pytest.approx(f_gm(X, ctx), rel=1e-9, abs=1e-9)
    grad = model.linear + 2 * model.hessian_half(theta) @ x
    np.testing.assert_allclose(grad.reshape(X.shape, order="F"), grad_f_theta(X, ctx),
                               rtol=1e-9, atol=1e-9)


def test_con_gradient_matches_definition(small_problem, rng):
    X = rng.random((4, 4))
    ctx = ObjectiveContext(small_problem, [0.5, 0.5])
    h = 1e-6
    E = np.zeros((4, 4))
    E[1, 2] = h
    fd = (f_con(X + E, ctx) - f_con(X - E, ctx)) / (2 * h)
    assert grad_f_con(X, ctx)[1, 2] == pytest.approx(fd, rel=1e-6)
