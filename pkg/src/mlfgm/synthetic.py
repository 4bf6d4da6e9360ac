"""Random multi-attributed graph pairs with deformation and outliers."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .affinity import KernelConfig, MatchingProblem, build_layer_affinities
from .graph import MultiLayerGraph, ValidationError, complete_digraph


@dataclass(frozen=True)
class SyntheticParams:
    n_inliers: int = 20
    n_outliers: int = 2
    n_attributes: int = 5
    deformation: float = 0.0
    sigma_sq: float = 0.3
    omega_range: tuple[float, float] = (0.1, 1.0)
    coupling: float = 1.0
    permute: bool = True
    seed: int = 0

    def __post_init__(self):
        lo, hi = self.omega_range
        if self.n_inliers < 1 or self.n_outliers < 0 or self.n_attributes < 1:
            raise ValidationError("need n_inliers >= 1, n_outliers >= 0, n_attributes >= 1")
        if self.deformation < 0:
            raise ValidationError("deformation must be non-negative")
        if not 0.0 < lo <= hi <= 1.0:
            raise ValidationError("omega_range must lie within (0, 1]")


def _graph_attrs(base: np.ndarray, n_in: int, n: int, eps: float, rng) -> np.ndarray:
    """Edge attributes of one observed graph, indexed by ``(i, j)`` of the full graph."""
    n_layers = base.shape[0]
    attrs = rng.uniform(0.0, 1.0, size=(n_layers, n, n))
    noise = rng.normal(0.0, eps, size=(n_layers, n_in, n_in)) if eps > 0 else 0.0
    attrs[:, :n_in, :n_in] = base + noise
    return attrs


def generate_synthetic_pair(params: SyntheticParams) -> MatchingProblem:
    """Two noisy copies of a random complete digraph, each with its own outliers.

    With ``permute`` the vertices of the second graph are shuffled and the
    ground truth records where each inlier went; otherwise inlier ``i`` of the
    first graph matches vertex ``i`` of the second.
    """
    rng = np.random.default_rng(params.seed)
    n_in, n_layers = params.n_inliers, params.n_attributes
    n = n_in + params.n_outliers
    base = rng.uniform(0.0, 1.0, size=(n_layers, n_in, n_in))
    omega = rng.uniform(*params.omega_range, size=n_layers)
    eps = params.deformation
    a1 = _graph_attrs(base, n_in, n, eps, rng)
    a2 = _graph_attrs(base, n_in, n, eps, rng)
    perm = rng.permutation(n) if params.permute else np.arange(n)
    # vertex v of graph 2 carries original vertex inv[v]
    inv = np.argsort(perm)
    a2 = a2[:, inv][:, :, inv]

    edges = complete_digraph(n)
    g1 = MultiLayerGraph(n, n_layers, edges, edge_attrs=a1[:, edges[:, 0], edges[:, 1]])
    g2 = MultiLayerGraph(n, n_layers, edges, edge_attrs=a2[:, edges[:, 0], edges[:, 1]])
    config = KernelConfig(omega=tuple(omega), sigma_sq=params.sigma_sq, coupling=params.coupling)
    aff = build_layer_affinities(g1, g2, config)
    meta = {"omega": [float(w) for w in omega], "seed": int(params.seed)}
    return MatchingProblem(g1, g2, aff, ground_truth=perm[:n_in], meta=meta)


def accuracy(X, ground_truth) -> float:
    """Fraction of inliers mapped to their true partner."""
    X = np.asarray(getattr(X, "matrix", X))
    gt = np.asarray(ground_truth, dtype=np.int64)
    if len(gt) == 0:
        return 0.0
    return float(np.sum(X[np.arange(len(gt)), gt] == 1)) / len(gt)
