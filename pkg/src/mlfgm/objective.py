"""Objective terms of the multi-layer relaxation and their gradients.

The functions here evaluate every term literally from the factor matrices
and are what the tests check against the dense supra-adjacency. The solver
instead uses :class:`QuadraticModel`, which folds the same factors into one
``vec(X)``-space quadratic per confidence update.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .factorization import CouplingMatrices, FactorizedProblem, build_coupling
from .graph import ValidationError


@dataclass(frozen=True)
class ObjectiveContext:
    problem: FactorizedProblem
    confidence: np.ndarray
    theta: float = 0.0
    coupling: CouplingMatrices = field(init=False, repr=False)

    def __post_init__(self):
        lc = np.asarray(self.confidence, dtype=float).reshape(-1)
        if not 0.0 <= self.theta <= 1.0:
            raise ValidationError(f"theta must lie in [0, 1], got {self.theta}")
        object.__setattr__(self, "confidence", lc)
        object.__setattr__(self, "coupling", build_coupling(lc, self.problem.incidences))

    def with_theta(self, theta: float) -> "ObjectiveContext":
        return ObjectiveContext(self.problem, self.confidence, theta)

    def with_confidence(self, confidence) -> "ObjectiveContext":
        return ObjectiveContext(self.problem, confidence, self.theta)


def uniform_confidence(n_layers: int) -> np.ndarray:
    return np.full(n_layers, 1.0 / n_layers)


def _matrix(X, shape) -> np.ndarray:
    X = getattr(X, "matrix", X)
    X = np.asarray(X, dtype=float)
    if X.shape != tuple(shape):
        raise ValidationError(f"assignment has shape {X.shape}, expected {tuple(shape)}")
    return X


def f_gm_dense(X, confidence, P) -> float:
    """``(L_C kron vec(X))^T P (L_C kron vec(X))``."""
    lc = np.asarray(confidence, dtype=float).reshape(-1)
    X = np.asarray(getattr(X, "matrix", X), dtype=float)
    z = np.kron(lc, X.reshape(-1, order="F"))
    if P.shape != (z.size, z.size):
        raise ValidationError(f"supra-adjacency {P.shape} does not fit a vector of length {z.size}")
    return float(z @ P @ z)


def _unary(X, ctx) -> float:
    return float(np.einsum("a,aij,ij->", ctx.confidence, ctx.problem.affinities.Kp, X))


def _pair_traces(X, F1, F2) -> np.ndarray:
    # tr(F1[m]^T X F2[m, n] X^T) for every (m, n)
    if F1.shape[0] == 0:
        return np.zeros((0, F2.shape[1]))
    XtFX = np.einsum("ia,mij,jb->mab", X, F1, X, optimize=True)
    return np.einsum("mab,mnab->mn", XtFX, F2)


def f_gm(X, ctx: ObjectiveContext) -> float:
    p = ctx.problem
    X = _matrix(X, p.shape)
    lam_i, lam_t = ctx.coupling.lam_i, ctx.coupling.lam_t
    value = _unary(X, ctx)
    value += float(np.sum(_pair_traces(X, p.A1, p.A2) * lam_i))
    value += float(np.sum(_pair_traces(X, p.B1, p.B2) * lam_t))
    return value


def _con_terms(X, F1, F2) -> np.ndarray:
    # ||X^T F1[m]||^2 + ||F2[m, n] X^T||^2 for every (m, n)
    if F1.shape[0] == 0:
        return np.zeros((0, F2.shape[1]))
    left = np.einsum("ia,mij->maj", X, F1, optimize=True)
    right = np.einsum("mnab,jb->mnaj", F2, X, optimize=True)
    return (left**2).sum(axis=(1, 2))[:, None] + (right**2).sum(axis=(2, 3))


def f_con(X, ctx: ObjectiveContext) -> float:
    p = ctx.problem
    X = _matrix(X, p.shape)
    return float(
        np.sum(_con_terms(X, p.A1, p.A2) * ctx.coupling.lam_i)
        + np.sum(_con_terms(X, p.B1, p.B2) * ctx.coupling.lam_t)
    )


def _frobenius(X, F1, F2, sign: float) -> np.ndarray:
    # ||X^T F1[m] + sign * F2[m, n] X^T||_F^2
    if F1.shape[0] == 0:
        return np.zeros((0, F2.shape[1]))
    left = np.einsum("ia,mij->maj", X, F1, optimize=True)
    right = np.einsum("mnab,jb->mnaj", F2, X, optimize=True)
    return ((left[:, None] + sign * right) ** 2).sum(axis=(2, 3))


def _relaxed(X, ctx, sign: float) -> float:
    p = ctx.problem
    X = _matrix(X, p.shape)
    pair = np.sum(_frobenius(X, p.A1, p.A2, sign) * ctx.coupling.lam_i)
    pair += np.sum(_frobenius(X, p.B1, p.B2, sign) * ctx.coupling.lam_t)
    return _unary(X, ctx) + sign * 0.5 * float(pair)


def f_vex(X, ctx: ObjectiveContext) -> float:
    """Relaxation with a negative semidefinite Hessian (``F_gm - F_con / 2``)."""
    return _relaxed(X, ctx, -1.0)


def f_cav(X, ctx: ObjectiveContext) -> float:
    """Relaxation with a positive semidefinite Hessian (``F_gm + F_con / 2``)."""
    return _relaxed(X, ctx, 1.0)


def f_theta(X, ctx: ObjectiveContext) -> float:
    return (1.0 - ctx.theta) * f_vex(X, ctx) + ctx.theta * f_cav(X, ctx)


def grad_f_gm(X, ctx: ObjectiveContext) -> np.ndarray:
    p = ctx.problem
    X = _matrix(X, p.shape)
    grad = np.einsum("a,aij->ij", ctx.confidence, p.affinities.Kp)
    for F1, F2, lam in ((p.A1, p.A2, ctx.coupling.lam_i), (p.B1, p.B2, ctx.coupling.lam_t)):
        if F1.shape[0] == 0:
            continue
        F2w = np.einsum("mnab,n->mab", F2, lam)
        grad = grad + np.einsum("mij,jb,mab->ia", F1, X, F2w, optimize=True)
        grad = grad + np.einsum("mji,jb,mba->ia", F1, X, F2w, optimize=True)
    return grad


def grad_f_con(X, ctx: ObjectiveContext) -> np.ndarray:
    p = ctx.problem
    X = _matrix(X, p.shape)
    grad = np.zeros_like(X)
    for F1, F2, lam in ((p.A1, p.A2, ctx.coupling.lam_i), (p.B1, p.B2, ctx.coupling.lam_t)):
        if F1.shape[0] == 0:
            continue
        C1 = np.einsum("mij,mkj->ik", F1, F1) * lam.sum()
        C2 = np.einsum("mnji,mnjk,n->ik", F2, F2, lam, optimize=True)
        grad += 2.0 * (C1 @ X + X @ C2)
    return grad


def grad_f_theta(X, ctx: ObjectiveContext) -> np.ndarray:
    """Gradient of ``(1 - theta) F_vex + theta F_cav`` with respect to ``X``."""
    return grad_f_gm(X, ctx) + (ctx.theta - 0.5) * grad_f_con(X, ctx)


class QuadraticModel:
    """``F_theta`` as ``c . x + x^T Q_theta x`` over ``x = vec(X)``.

    Per-layer intra-layer blocks ``sum_m kron(A2[m, n], A1[m])`` are built
    once; confidence changes only reweight them. Inter-layer factors are
    reweighted first and then expanded, which keeps memory linear in the
    number of layer pairs.
    """

    def __init__(self, problem: FactorizedProblem):
        self.problem = problem
        n = problem.shape[0]
        self.n = n
        eye = np.eye(n)
        A1, A2 = problem.A1, problem.A2
        n_layers = problem.n_layers
        r = A1.shape[0]
        if r:
            a1 = A1.reshape(r, n * n)
            blocks = []
            for k in range(n_layers):
                a2 = A2[:, k].reshape(r, n * n)
                # (a, b, i, j) -> (a, i, b, j) so rows/cols follow vec order a*n + i
                blk = (a2.T @ a1).reshape(n, n, n, n).transpose(0, 2, 1, 3).reshape(n * n, n * n)
                blocks.append(blk)
            self._intra = np.stack(blocks)
            C1 = np.einsum("mij,mkj->ik", A1, A1)
            C2 = np.einsum("mnji,mnjk->nik", A2, A2, optimize=True)
        else:
            self._intra = np.zeros((n_layers, n * n, n * n))
            C1 = np.zeros((n, n))
            C2 = np.zeros((n_layers, n, n))
        self._con_i = (np.kron(eye, C1), np.stack([np.kron(c, eye) for c in C2]))
        B1, B2 = problem.B1, problem.B2
        if B1.shape[0]:
            C1t = np.einsum("mij,mkj->ik", B1, B1)
            C2t = np.einsum("mnji,mnjk->nik", B2, B2, optimize=True)
            self._con_t = (np.kron(eye, C1t), C2t)
        else:
            self._con_t = None
        self.set_confidence(np.full(n_layers, 1.0 / n_layers))

    def set_confidence(self, confidence):
        p = self.problem
        lc = np.asarray(confidence, dtype=float)
        coupling = build_coupling(lc, p.incidences)
        lam_i, lam_t = coupling.lam_i, coupling.lam_t
        n = self.n
        eye = np.eye(n)
        self.confidence = lc
        self.linear = np.einsum("a,aij->ij", lc, p.affinities.Kp).reshape(-1, order="F")

        gm = np.einsum("n,nuv->uv", lam_i, self._intra)
        con = lam_i.sum() * self._con_i[0] + np.einsum("n,nuv->uv", lam_i, self._con_i[1])
        if p.B1.shape[0]:
            B2w = np.einsum("mnab,n->mab", p.B2, lam_t)
            for b1, b2 in zip(p.B1, B2w):
                gm = gm + np.kron(b2, b1)
            con = con + lam_t.sum() * self._con_t[0] + np.kron(
                np.einsum("n,nik->ik", lam_t, self._con_t[1]), eye
            )
        self.Q_gm = 0.5 * (gm + gm.T)
        self.Q_con = 0.5 * (con + con.T)

    def hessian_half(self, theta: float) -> np.ndarray:
        return self.Q_gm + (theta - 0.5) * self.Q_con

    def value(self, x: np.ndarray, theta: float) -> float:
        return float(self.linear @ x + x @ (self.hessian_half(theta) @ x))

    def gm(self, x: np.ndarray) -> float:
        return float(self.linear @ x + x @ (self.Q_gm @ x))
