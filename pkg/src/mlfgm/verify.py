"""Oracle comparisons and numerical property checks.

Each ``check_*`` function returns a :class:`Check` with a pass flag and the
worst observed discrepancy, so the same code backs the ``verify`` command and
the acceptance tests.
"""

from __future__ import annotations

from dataclasses import dataclass
from itertools import permutations

import numpy as np

from .affinity import LayerAffinities, MatchingProblem, pad_with_dummies
from .factorization import assemble_dense_supra, build_factorized_problem, dense_storage
from .graph import MultiLayerGraph, complete_digraph, layer_pairs
from .objective import (
    ObjectiveContext,
    f_cav,
    f_con,
    f_gm,
    f_gm_dense,
    f_theta,
    f_vex,
    grad_f_theta,
)
from .solver import hungarian, permutation_matrix


@dataclass
class Check:
    name: str
    passed: bool
    worst: float
    detail: str = ""

    def line(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        return f"[{status}] {self.name}: worst={self.worst:.3e} {self.detail}".rstrip()


def random_problem(rng, n1: int, n2: int | None = None, n_layers: int = 2,
                   density: float = 1.0, unary: bool = False,
                   custom_inter: bool = False) -> MatchingProblem:
    """Random graph pair with random non-negative affinities.

    ``density`` is the probability of keeping each directed edge of the
    complete digraph; ``custom_inter`` replaces self-coupling with a random
    pair list.
    """
    n2 = n1 if n2 is None else n2

    def graph(n):
        edges = complete_digraph(n)
        if density < 1.0 and len(edges):
            edges = edges[rng.random(len(edges)) < density]
        inter = None
        if custom_inter:
            k = int(rng.integers(1, n + 1))
            inter = np.stack([rng.integers(0, n, k), rng.integers(0, n, k)], axis=1)
        return MultiLayerGraph(n, n_layers, edges, inter_pairs=inter)

    g1, g2 = graph(n1), graph(n2)
    m1t, m2t = len(g1.coupling_pairs()), len(g2.coupling_pairs())
    Kp = rng.random((n_layers, n1, n2)) if unary else np.zeros((n_layers, n1, n2))
    aff = LayerAffinities(
        Kp,
        rng.random((n_layers, g1.n_edges, g2.n_edges)),
        rng.random((len(layer_pairs(n_layers)), m1t, m2t)),
    )
    return MatchingProblem(g1, g2, aff)


def direct_supra(problem: MatchingProblem) -> np.ndarray:
    """Supra-adjacency built by placing every affinity entry at its position.

    Candidate ``(i, a)`` of layer ``alpha`` sits at
    ``alpha * N1 * N2 + a * N1 + i``.
    """
    g1, g2, aff = problem.g1, problem.g2, problem.affinities
    n1, n2 = g1.n_vertices, g2.n_vertices
    n_layers = aff.n_layers

    def idx(layer, i, a):
        return layer * n1 * n2 + a * n1 + i

    size = n_layers * n1 * n2
    P = np.zeros((size, size))
    for k in range(n_layers):
        for i in range(n1):
            for a in range(n2):
                P[idx(k, i, a), idx(k, i, a)] += aff.Kp[k, i, a]
        for e1, (i, j) in enumerate(g1.intra_edges):
            for e2, (a, b) in enumerate(g2.intra_edges):
                P[idx(k, i, a), idx(k, j, b)] += aff.Kqi[k, e1, e2]
    c1, c2 = g1.coupling_pairs(), g2.coupling_pairs()
    for n, (alpha, beta) in enumerate(layer_pairs(n_layers)):
        for t1, (i, j) in enumerate(c1):
            for t2, (a, b) in enumerate(c2):
                P[idx(alpha, i, a), idx(beta, j, b)] += aff.Kqt[n, t1, t2]
    return P


def _rel(a: float, b: float) -> float:
    return abs(a - b) / max(1.0, abs(b))


def random_doubly_stochastic(rng, n: int, terms: int = 6) -> np.ndarray:
    w = rng.dirichlet(np.ones(terms))
    return sum(wk * permutation_matrix(rng.permutation(n)) for wk in w)


def check_factorization_oracle(n_problems: int = 50, seed: int = 0) -> Check:
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(n_problems):
        n = int(rng.integers(1, 7))
        n_layers = int(rng.integers(1, 4))
        prob = random_problem(rng, n, n_layers=n_layers, density=rng.uniform(0.3, 1.0),
                              unary=bool(rng.integers(2)), custom_inter=bool(rng.integers(2)))
        fp = build_factorized_problem(prob)
        diff = np.abs(assemble_dense_supra(fp) - direct_supra(prob)).max(initial=0.0)
        worst = max(worst, float(diff))
    return Check("factorization oracle", worst <= 1e-10, worst, f"{n_problems} problems, tol 1e-10")


def check_objective_equivalence(n_pairs: int = 100, seed: int = 1) -> Check:
    """Factorized objective against the dense quadratic form.

    Problems carry no unary affinities: the factorized unary term is linear
    in both ``X`` and the confidence, while the dense form is quadratic in
    both, so they only coincide when unary affinities vanish.
    """
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(n_pairs):
        n = int(rng.integers(1, 6))
        n_layers = int(rng.integers(1, 4))
        prob = random_problem(rng, n, n_layers=n_layers, density=rng.uniform(0.3, 1.0),
                              custom_inter=bool(rng.integers(2)))
        fp = build_factorized_problem(prob)
        P = assemble_dense_supra(fp)
        lc = rng.random(n_layers)
        X = rng.random((n, n))
        dense = f_gm_dense(X, lc, P)
        worst = max(worst, _rel(f_gm(X, ObjectiveContext(fp, lc)), dense))
    return Check("objective equivalence", worst <= 1e-8, worst, f"{n_pairs} pairs, tol 1e-8")


def check_relaxation_identities(n_problems: int = 20, seed: int = 2) -> list[Check]:
    rng = np.random.default_rng(seed)
    ident, midpoint, spread_worst = 0.0, 0.0, 0.0
    for _ in range(n_problems):
        n = int(rng.integers(2, 6))
        n_layers = int(rng.integers(1, 4))
        prob = random_problem(rng, n, n_layers=n_layers, density=rng.uniform(0.3, 1.0),
                              unary=bool(rng.integers(2)))
        fp = build_factorized_problem(prob)
        lc = rng.random(n_layers)
        ctx = ObjectiveContext(fp, lc, 0.5)
        for _ in range(5):
            X = rng.random((n, n))
            gm, vex, cav = f_gm(X, ctx), f_vex(X, ctx), f_cav(X, ctx)
            ident = max(ident, abs(vex + cav - 2 * gm) / max(1.0, abs(gm)))
            avg = 0.5 * (abs(vex) + abs(cav))
            midpoint = max(midpoint, abs(f_theta(X, ctx) - gm) / max(1.0, avg))
        cons = [f_con(permutation_matrix(rng.permutation(n)), ctx) for _ in range(20)]
        spread_worst = max(spread_worst, (max(cons) - min(cons)) / max(1.0, abs(np.mean(cons))))
    return [
        Check("f_vex + f_cav = 2 f_gm", ident <= 1e-9, ident, "tol 1e-9"),
        Check("f_theta(0.5) = f_gm", midpoint <= 1e-12, midpoint, "tol 1e-12"),
        Check("f_con constant on permutations", spread_worst < 1e-9, spread_worst, "tol 1e-9"),
    ]


def explicit_hessian(ctx: ObjectiveContext) -> np.ndarray:
    """Hessian of ``f_theta`` in ``vec(X)`` from gradients of basis perturbations."""
    n1, n2 = ctx.problem.shape
    base = grad_f_theta(np.zeros((n1, n2)), ctx).reshape(-1, order="F")
    H = np.empty((n1 * n2, n1 * n2))
    for k in range(n1 * n2):
        E = np.zeros(n1 * n2)
        E[k] = 1.0
        H[:, k] = grad_f_theta(E.reshape(n1, n2, order="F"), ctx).reshape(-1, order="F") - base
    return 0.5 * (H + H.T)


def check_definiteness(n_problems: int = 10, seed: int = 3) -> Check:
    rng = np.random.default_rng(seed)
    worst = -np.inf
    for _ in range(n_problems):
        n = int(rng.integers(2, 7))
        n_layers = int(rng.integers(1, 4))
        prob = random_problem(rng, n, n_layers=n_layers, density=rng.uniform(0.3, 1.0),
                              unary=bool(rng.integers(2)), custom_inter=bool(rng.integers(2)))
        fp = build_factorized_problem(prob)
        lc = rng.uniform(0.05, 1.0, n_layers)
        vex = np.linalg.eigvalsh(explicit_hessian(ObjectiveContext(fp, lc, 0.0))).max()
        cav = np.linalg.eigvalsh(explicit_hessian(ObjectiveContext(fp, lc, 1.0))).min()
        worst = max(worst, vex, -cav)
    return Check(
        "Hessian signs (max eig vex <= 1e-8, min eig cav >= -1e-8)",
        worst <= 1e-8, float(worst), f"{n_problems} problems",
    )


def fd_gradient_error(ctx: ObjectiveContext, X: np.ndarray, h: float = 1e-5) -> float:
    g = grad_f_theta(X, ctx)
    fd = np.empty_like(X)
    for idx in np.ndindex(*X.shape):
        E = np.zeros_like(X)
        E[idx] = h
        fd[idx] = (f_theta(X + E, ctx) - f_theta(X - E, ctx)) / (2 * h)
    denom = np.maximum(np.abs(fd), max(1e-6 * np.abs(fd).max(), 1e-12))
    return float(np.max(np.abs(g - fd) / denom))


def check_gradient(n_instances: int = 20, seed: int = 4) -> Check:
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(n_instances):
        n = int(rng.integers(2, 6))
        n_layers = int(rng.integers(1, 4))
        prob = random_problem(rng, n, n_layers=n_layers, density=rng.uniform(0.3, 1.0),
                              unary=bool(rng.integers(2)), custom_inter=bool(rng.integers(2)))
        fp = build_factorized_problem(prob)
        ctx = ObjectiveContext(fp, rng.random(n_layers), float(rng.random()))
        worst = max(worst, fd_gradient_error(ctx, rng.random((n, n))))
    return Check("gradient vs central differences", worst < 1e-5, worst, "h=1e-5, tol 1e-5")


def check_hungarian(n_matrices: int = 100, n: int = 6, seed: int = 5) -> Check:
    rng = np.random.default_rng(seed)
    perms = np.array(list(permutations(range(n))))
    mismatches = 0
    worst = 0.0
    for _ in range(n_matrices):
        M = rng.random((n, n))
        best = M[np.arange(n), perms].sum(axis=1).max()
        got = M[np.arange(n), hungarian(M)].sum()
        worst = max(worst, abs(best - got))
        mismatches += not np.isclose(got, best, rtol=0, atol=1e-12)
    return Check("Hungarian vs enumeration", mismatches == 0, worst,
                 f"{mismatches}/{n_matrices} mismatches")


def check_footnote_identity(n_trials: int = 50, seed: int = 6) -> Check:
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(n_trials):
        m, k = rng.integers(1, 8, size=2)
        u, v = rng.standard_normal(m), rng.standard_normal(k)
        A, B = rng.standard_normal((m, k)), rng.standard_normal((m, k))
        lhs = np.trace(np.outer(u, v).T @ (A * B))
        rhs = np.trace(np.diag(u) @ A @ np.diag(v) @ B.T)
        worst = max(worst, abs(lhs - rhs) / max(1.0, abs(lhs)))
    return Check("trace/Hadamard identity", worst <= 1e-12, worst, "tol 1e-12")


def check_padding(n_problems: int = 10, seed: int = 7) -> Check:
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(n_problems):
        n1 = int(rng.integers(1, 5))
        n2 = int(rng.integers(n1, 6))
        if rng.integers(2):
            n1, n2 = n2, n1
        n_layers = int(rng.integers(1, 3))
        prob = random_problem(rng, n1, n2, n_layers=n_layers, unary=True)
        padded, _ = pad_with_dummies(prob)
        P0, P1 = direct_supra(prob), direct_supra(padded)
        n = max(n1, n2)
        lc = rng.random(n_layers)
        for _ in range(5):
            k = min(n1, n2)
            rows = rng.permutation(n1)[:k]
            cols = rng.permutation(n2)[:k]
            X = np.zeros((n1, n2))
            X[rows, cols] = 1.0
            Xp = np.zeros((n, n))
            Xp[:n1, :n2] = X
            worst = max(worst, _rel(f_gm_dense(Xp, lc, P1), f_gm_dense(X, lc, P0)))
    return Check("padding preserves objective", worst <= 1e-12, worst, "tol 1e-12")


def check_unary_residual(n_pairs: int = 30, seed: int = 8) -> Check:
    """Dense minus factorized objective with unary affinities present.

    The dense quadratic form weights unary entries by ``L_C^2 X^2`` while the
    factorized form is linear, so the gap must be exactly
    ``sum_a L_C[a]^2 <Kp_a, X*X> - L_C[a] <Kp_a, X>``.
    """
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(n_pairs):
        n = int(rng.integers(1, 6))
        n_layers = int(rng.integers(1, 4))
        prob = random_problem(rng, n, n_layers=n_layers, unary=True)
        fp = build_factorized_problem(prob)
        lc = rng.random(n_layers)
        X = rng.random((n, n))
        Kp = prob.affinities.Kp
        expected = float(np.einsum("a,aij,ij->", lc**2, Kp, X * X) - np.einsum("a,aij,ij->", lc, Kp, X))
        gap = f_gm_dense(X, lc, assemble_dense_supra(fp)) - f_gm(X, ObjectiveContext(fp, lc))
        worst = max(worst, _rel(gap, expected))
    return Check("unary residual of dense vs factorized form", worst <= 1e-9, worst, "tol 1e-9")


def factorized_storage(n: int, n_layers: int, rank_i: int, rank_t: int) -> int:
    """Scalars in ``Kp``, ``A1``, ``A2``, ``B1``, ``B2`` for given ranks."""
    n_pairs = n_layers * (n_layers - 1)
    return n * n * (n_layers + rank_i * (1 + n_layers) + rank_t * (1 + n_pairs))


def check_memory_accounting(sizes=(3, 4, 5, 6), layer_counts=(1, 2, 3, 4), seed: int = 9) -> Check:
    """Stored scalar counts against the closed form and the dense size.

    With complete topology the intra rank is at most ``N(N-1)`` and the
    self-coupling rank at most ``N``, so storage is bounded by
    ``N^4 N_L + N^3 N_L^2`` up to constants, against ``N^4 N_L^2`` dense.
    """
    rng = np.random.default_rng(seed)
    worst = 0.0
    ok = True
    for n in sizes:
        for n_layers in layer_counts:
            fp = build_factorized_problem(random_problem(rng, n, n_layers=n_layers, unary=True))
            stored = fp.stored_scalars()
            ok &= stored == factorized_storage(n, n_layers, fp.rank_i, fp.rank_t)
            ok &= fp.rank_i <= n * (n - 1) and fp.rank_t <= n
            bound = 2 * (n**4 * n_layers + n**3 * n_layers**2) + n * n * n_layers
            ok &= stored <= bound
            if n_layers >= 2 and n >= 4:
                ok &= stored < dense_storage(n, n_layers)
                worst = max(worst, stored / dense_storage(n, n_layers))
    return Check("memory accounting", bool(ok), worst, "worst = stored/dense for N>=4, N_L>=2")


def run_all(quick: bool = False) -> list[Check]:
    scale = 5 if quick else 1
    checks = [
        check_factorization_oracle(50 // scale),
        check_objective_equivalence(100 // scale),
        *check_relaxation_identities(20 // scale),
        check_definiteness(10 // scale),
        check_gradient(20 // scale),
        check_hungarian(100 // scale),
        check_footnote_identity(),
        check_padding(),
        check_unary_residual(30 // scale),
        check_memory_accounting(),
    ]
    return checks
