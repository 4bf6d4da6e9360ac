"""Comparison methods: spectral matching, exhaustive search, single-layer FGM."""

from __future__ import annotations

import logging
from dataclasses import dataclass
from itertools import permutations

import numpy as np

from .factorization import FactorizedProblem, assemble_dense_supra, split_pairwise, DENSE_LIMIT
from .graph import Assignment, MultiLayerGraph, ValidationError, build_edge_incidence
from .objective import ObjectiveContext, f_gm, f_gm_dense, uniform_confidence
from .solver import SolverConfig, hungarian, path_following, permutation_matrix

log = logging.getLogger(__name__)

BRUTE_FORCE_LIMIT = 8


@dataclass(frozen=True)
class SingleLayerProblem:
    """Lawler-style affinity over candidates ``(i, a)`` in column-major order."""

    K: np.ndarray
    n1: int
    n2: int

    def score(self, X) -> float:
        x = np.asarray(getattr(X, "matrix", X), dtype=float).reshape(-1, order="F")
        return float(x @ self.K @ x)


def build_single_layer(Kp, Kq, g1: MultiLayerGraph, g2: MultiLayerGraph) -> SingleLayerProblem:
    """Place edge-pair affinities at ``K[(i,a), (j,b)]`` and unary ones on the diagonal.

    The result is symmetrized; the quadratic form is unchanged by this.
    """
    n1, n2 = g1.n_vertices, g2.n_vertices
    Kp = np.asarray(Kp, dtype=float)
    Kq = np.asarray(Kq, dtype=float)
    if Kp.shape != (n1, n2) or Kq.shape != (g1.n_edges, g2.n_edges):
        raise ValidationError("integrated affinities do not fit the graphs")
    K = np.zeros((n1 * n2, n1 * n2))
    e1, e2 = g1.intra_edges, g2.intra_edges
    if len(e1) and len(e2):
        rows = e1[:, 0][:, None] + n1 * e2[:, 0][None, :]
        cols = e1[:, 1][:, None] + n1 * e2[:, 1][None, :]
        K[rows, cols] = Kq
    K[np.diag_indices_from(K)] += Kp.reshape(-1, order="F")
    return SingleLayerProblem(0.5 * (K + K.T), n1, n2)


@dataclass
class SpectralResult:
    assignment: Assignment
    eigenvector: np.ndarray
    iterations: int
    converged: bool


def spectral_match(problem: SingleLayerProblem, tol: float = 1e-8, max_iter: int = 1000) -> SpectralResult:
    """Leading eigenvector of ``K`` by power iteration, rounded by the Hungarian method."""
    K = problem.K
    v = np.ones(K.shape[0]) / np.sqrt(K.shape[0])
    converged = False
    it = 0
    for it in range(1, max_iter + 1):
        w = K @ v
        norm = np.linalg.norm(w)
        if norm == 0:
            converged = True
            break
        w /= norm
        delta = np.linalg.norm(w - v)
        v = w
        if delta < tol:
            converged = True
            break
    if not converged:
        log.info("power iteration stopped after %d iterations", it)
    M = v.reshape(problem.n1, problem.n2, order="F")
    perm = hungarian(M)
    n = max(problem.n1, problem.n2)
    X = permutation_matrix(perm, n)[: problem.n1, : problem.n2]
    return SpectralResult(Assignment(X, "binary"), v, it, converged)


def brute_force_qap(problem, confidence=None) -> tuple[Assignment, float]:
    """Exhaustive maximization over all permutations (``N <= 8``).

    ``problem`` is a :class:`FactorizedProblem` (scored with the multi-layer
    objective at ``confidence``, uniform by default) or a
    :class:`SingleLayerProblem`.
    """
    if isinstance(problem, SingleLayerProblem):
        n = max(problem.n1, problem.n2)
        if problem.n1 != problem.n2:
            raise ValidationError("single-layer brute force needs a square problem")
        score = problem.score
    elif isinstance(problem, FactorizedProblem):
        n = problem.shape[0]
        lc = uniform_confidence(problem.n_layers) if confidence is None else np.asarray(confidence)
        if problem.n_layers * n * n <= DENSE_LIMIT:
            P = assemble_dense_supra(problem)
            def score(X):
                return f_gm_dense(X, lc, P)
        else:
            ctx = ObjectiveContext(problem, lc)
            def score(X):
                return f_gm(X, ctx)
    else:
        raise TypeError(f"unsupported problem type {type(problem).__name__}")
    if n > BRUTE_FORCE_LIMIT:
        raise ValidationError(f"brute force refused for N={n} > {BRUTE_FORCE_LIMIT}")
    best, best_perm = -np.inf, None
    for perm in permutations(range(n)):
        value = score(permutation_matrix(perm))
        if value > best:
            best, best_perm = value, perm
    return Assignment(permutation_matrix(best_perm), "binary"), float(best)


class SingleLayerFGM:
    """Factorized path-following objective for one affinity layer.

    Mirrors :class:`mlfgm.objective.QuadraticModel` for a graph pair with a
    single set of unary and edge affinities and no confidence weights.
    """

    def __init__(self, Kp, Kq, g1: MultiLayerGraph, g2: MultiLayerGraph, tol: float = 1e-10):
        n = g1.n_vertices
        if g2.n_vertices != n:
            raise ValidationError("single-layer FGM needs equal vertex counts")
        self.n = n
        G1, H1 = build_edge_incidence(g1)
        G2, H2 = build_edge_incidence(g2)
        U, V = split_pairwise(Kq, tol)
        A1 = np.stack([G1 @ np.diag(u) @ H1.T for u in U.T]) if U.shape[1] else np.zeros((0, n, n))
        A2 = np.stack([G2 @ np.diag(v) @ H2.T for v in V.T]) if V.shape[1] else np.zeros((0, n, n))
        eye = np.eye(n)
        gm = sum((np.kron(a2, a1) for a1, a2 in zip(A1, A2)), np.zeros((n * n, n * n)))
        C1 = sum((a @ a.T for a in A1), np.zeros((n, n)))
        C2 = sum((a.T @ a for a in A2), np.zeros((n, n)))
        con = np.kron(eye, C1) + np.kron(C2, eye)
        self.linear = np.asarray(Kp, dtype=float).reshape(-1, order="F")
        self.Q_gm = 0.5 * (gm + gm.T)
        self.Q_con = 0.5 * (con + con.T)
        self.confidence = np.ones(1)

    def set_confidence(self, confidence):  # single layer: nothing to reweight
        pass

    def hessian_half(self, theta: float) -> np.ndarray:
        return self.Q_gm + (theta - 0.5) * self.Q_con

    def value(self, x, theta: float) -> float:
        return float(self.linear @ x + x @ (self.hessian_half(theta) @ x))

    def gm(self, x) -> float:
        return float(self.linear @ x + x @ (self.Q_gm @ x))


def fgm_single_layer(Kp, Kq, g1, g2, cfg: SolverConfig | None = None, record_fw: bool = False):
    """Run path following on one layer; returns ``(X_relaxed, traces)``."""
    cfg = cfg or SolverConfig(confidence_update=False)
    model = SingleLayerFGM(Kp, Kq, g1, g2)
    return path_following(model, model.n, cfg, update=None, record_fw=record_fw)
