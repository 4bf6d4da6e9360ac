"""Factorized representation of the multi-layer supra-adjacency matrix."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .affinity import DummyMapping, LayerAffinities, MatchingProblem, pad_with_dummies
from .graph import IncidenceBundle, ValidationError, build_incidences

DENSE_LIMIT = 200


def split_pairwise(Kq, tol: float = 1e-10) -> tuple[np.ndarray, np.ndarray]:
    """Factor ``Kq = U @ V.T`` by a truncated SVD.

    Singular values below ``tol * s_max`` are dropped and the square roots of
    the rest are shared between ``U`` and ``V``.
    """
    Kq = np.asarray(Kq, dtype=float)
    if not np.all(np.isfinite(Kq)):
        raise ValidationError("cannot factor a matrix with non-finite entries")
    rows, cols = Kq.shape
    if Kq.size == 0 or not np.any(Kq):
        return np.zeros((rows, 0)), np.zeros((cols, 0))
    L, s, Rt = np.linalg.svd(Kq, full_matrices=False)
    keep = s > tol * s[0]
    root = np.sqrt(s[keep])
    return L[:, keep] * root, Rt[keep].T * root


@dataclass(frozen=True)
class CouplingMatrices:
    """Confidence weights spread over intra- and inter-layer blocks."""

    Wi: np.ndarray
    Wt: np.ndarray
    Lambda_i: np.ndarray
    Lambda_t: np.ndarray

    @property
    def lam_i(self) -> np.ndarray:
        return np.diag(self.Lambda_i).copy()

    @property
    def lam_t(self) -> np.ndarray:
        return np.diag(self.Lambda_t).copy()


def build_coupling(confidence, incidences: IncidenceBundle) -> CouplingMatrices:
    lc = np.asarray(confidence, dtype=float).reshape(-1)
    if lc.shape[0] != incidences.n_layers:
        raise ValidationError(
            f"confidence has {lc.shape[0]} entries for {incidences.n_layers} layers"
        )
    if not np.all(np.isfinite(lc)):
        raise ValidationError("confidence must be finite")
    LGi, LHi, LGt, LHt = incidences.LGi, incidences.LHi, incidences.LGt, incidences.LHt
    outer = np.outer(lc, lc)
    return CouplingMatrices(
        Wi=(lc @ LGi) * (lc @ LHi),
        Wt=(lc @ LGt) * (lc @ LHt),
        Lambda_i=LHi.T @ outer @ LGi,
        Lambda_t=LHt.T @ outer @ LGt,
    )


def _vertex_factors(G, H, cols: np.ndarray) -> np.ndarray:
    """Stack ``G @ diag(c) @ H.T`` for every column ``c`` of ``cols``."""
    if cols.shape[1] == 0:
        return np.zeros((0, G.shape[0], H.shape[0]))
    return np.einsum("ie,er,je->rij", G, cols, H, optimize=True)


@dataclass(frozen=True, eq=False)
class FactorizedProblem:
    """Incidences, affinities and the low-rank vertex-space factors.

    ``A1`` is ``(R_i, N1, N1)`` and ``A2`` is ``(R_i, N_L, N2, N2)``; ``B1``
    and ``B2`` are the inter-layer counterparts with ``N_L*(N_L-1)`` blocks.
    """

    incidences: IncidenceBundle
    affinities: LayerAffinities
    U: np.ndarray
    V: np.ndarray
    S: np.ndarray
    T: np.ndarray
    A1: np.ndarray
    A2: np.ndarray
    B1: np.ndarray
    B2: np.ndarray

    @property
    def n_layers(self) -> int:
        return self.incidences.n_layers

    @property
    def shape(self) -> tuple[int, int]:
        return self.incidences.shape

    @property
    def rank_i(self) -> int:
        return self.U.shape[1]

    @property
    def rank_t(self) -> int:
        return self.S.shape[1]

    def stored_scalars(self) -> int:
        """Scalars held by the representation the solver works from."""
        return int(sum(a.size for a in (self.affinities.Kp, self.A1, self.A2, self.B1, self.B2)))


def build_factorized_problem(problem: MatchingProblem, tol: float = 1e-10) -> FactorizedProblem:
    n1, n2 = problem.shape
    if n1 != n2:
        raise ValidationError("factorization needs a square problem; pad with dummies first")
    inc = build_incidences(problem.g1, problem.g2)
    aff = problem.affinities
    n_layers = aff.n_layers
    n_pairs = inc.n_pairs

    U, V = split_pairwise(aff.Kqi_cat, tol)
    S, T = split_pairwise(aff.Kqt_cat, tol)

    A1 = _vertex_factors(inc.G1i, inc.H1i, U)
    m2i = aff.Kqi.shape[2]
    A2 = np.stack(
        [_vertex_factors(inc.G2i, inc.H2i, V[n * m2i:(n + 1) * m2i]) for n in range(n_layers)],
        axis=1,
    ) if U.shape[1] else np.zeros((0, n_layers, n2, n2))

    B1 = _vertex_factors(inc.G1t, inc.H1t, S)
    m2t = aff.Kqt.shape[2]
    B2 = np.stack(
        [_vertex_factors(inc.G2t, inc.H2t, T[n * m2t:(n + 1) * m2t]) for n in range(n_pairs)],
        axis=1,
    ) if S.shape[1] else np.zeros((0, n_pairs, n2, n2))

    for arr in (U, V, S, T, A1, A2, B1, B2):
        arr.flags.writeable = False
    return FactorizedProblem(inc, aff, U, V, S, T, A1, A2, B1, B2)


def factorize(problem: MatchingProblem, tol: float = 1e-10) -> tuple[FactorizedProblem, DummyMapping]:
    """Pad to square and factor in one go."""
    padded, mapping = pad_with_dummies(problem)
    return build_factorized_problem(padded, tol), mapping


def _check_dense_size(problem: FactorizedProblem):
    n1, n2 = problem.shape
    size = problem.n_layers * n1 * n2
    if size > DENSE_LIMIT:
        raise ValidationError(
            f"dense supra-adjacency would be {size}x{size}; refusing above {DENSE_LIMIT}"
        )


def assemble_dense_supra(problem: FactorizedProblem) -> np.ndarray:
    """Build the full supra-adjacency from incidence and affinity matrices.

    Each term is formed with explicit Kronecker products; only meant for
    small problems.
    """
    _check_dense_size(problem)
    inc, aff = problem.incidences, problem.affinities
    P = np.diag(aff.Kp_cat.reshape(-1, order="F"))
    for LG, LH, G2, G1, H2, H1, K in (
        (inc.LGi, inc.LHi, inc.G2i, inc.G1i, inc.H2i, inc.H1i, aff.Kqi_cat),
        (inc.LGt, inc.LHt, inc.G2t, inc.G1t, inc.H2t, inc.H1t, aff.Kqt_cat),
    ):
        if K.size == 0:
            continue
        left = np.kron(np.kron(LG, G2), G1)
        right = np.kron(np.kron(LH, H2), H1)
        P = P + (left * K.reshape(-1, order="F")) @ right.T
    return P


def dense_storage(n_vertices: int, n_layers: int) -> int:
    return (n_layers * n_vertices**2) ** 2
