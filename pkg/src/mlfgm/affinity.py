"""Unary, intra-layer and inter-layer affinity blocks."""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from .graph import MultiLayerGraph, ValidationError, layer_pairs, pad_graph


class ZeroBlockWarning(UserWarning):
    """An affinity block with no positive entry could not be normalized."""


@dataclass(frozen=True)
class LayerAffinities:
    """Per-layer affinity blocks.

    ``Kp`` is ``(N_L, N1, N2)``, ``Kqi`` is ``(N_L, M1i, M2i)`` and ``Kqt`` is
    ``(N_L*(N_L-1), M1t, M2t)`` in lexicographic layer-pair order.
    """

    Kp: np.ndarray
    Kqi: np.ndarray
    Kqt: np.ndarray

    def __post_init__(self):
        Kp, Kqi, Kqt = (np.asarray(a, dtype=float) for a in (self.Kp, self.Kqi, self.Kqt))
        if Kp.ndim != 3 or Kqi.ndim != 3 or Kqt.ndim != 3:
            raise ValidationError("affinity blocks must be stacked 3-d arrays")
        n_layers = Kp.shape[0]
        if Kqi.shape[0] != n_layers or Kqt.shape[0] != n_layers * (n_layers - 1):
            raise ValidationError(
                f"block counts {Kp.shape[0]}/{Kqi.shape[0]}/{Kqt.shape[0]} "
                f"inconsistent with {n_layers} layers"
            )
        for name, arr in (("Kp", Kp), ("Kqi", Kqi), ("Kqt", Kqt)):
            if not np.all(np.isfinite(arr)):
                raise ValidationError(f"{name} has non-finite entries")
            if arr.size and arr.min() < 0:
                raise ValidationError(f"{name} has negative entries")
            arr.flags.writeable = False
        object.__setattr__(self, "Kp", Kp)
        object.__setattr__(self, "Kqi", Kqi)
        object.__setattr__(self, "Kqt", Kqt)

    @property
    def n_layers(self) -> int:
        return self.Kp.shape[0]

    # concatenated forms [K^1 K^2 ...]
    @property
    def Kp_cat(self) -> np.ndarray:
        return np.concatenate(list(self.Kp), axis=1) if self.n_layers else self.Kp

    @property
    def Kqi_cat(self) -> np.ndarray:
        return _hcat(self.Kqi)

    @property
    def Kqt_cat(self) -> np.ndarray:
        return _hcat(self.Kqt)

    def __eq__(self, other):
        if not isinstance(other, LayerAffinities):
            return NotImplemented
        return all(
            a.shape == b.shape and np.array_equal(a, b)
            for a, b in ((self.Kp, other.Kp), (self.Kqi, other.Kqi), (self.Kqt, other.Kqt))
        )

    __hash__ = None


def _hcat(blocks: np.ndarray) -> np.ndarray:
    n, rows, cols = blocks.shape
    return blocks.transpose(1, 0, 2).reshape(rows, n * cols)


def synthetic_edge_affinity(r1, r2, omega, sigma_sq):
    """``exp(-|(1 - omega) + omega * (r1 - r2)| / sigma_sq)``.

    Broadcasts over array inputs.
    """
    if np.any(np.asarray(sigma_sq) <= 0):
        raise ValidationError("sigma_sq must be positive")
    diff = np.asarray(r1, dtype=float) - np.asarray(r2, dtype=float)
    return np.exp(-np.abs((1.0 - omega) + omega * diff) / sigma_sq)


@dataclass(frozen=True)
class KernelConfig:
    """Parameters of the synthetic affinity kernel.

    ``omega`` holds one weight per layer. Vector attributes enter the kernel
    through the Euclidean norm of their difference.
    """

    omega: tuple[float, ...]
    sigma_sq: float = 0.3
    unary: bool = False
    coupling: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "omega", tuple(float(w) for w in np.atleast_1d(self.omega)))
        if self.sigma_sq <= 0:
            raise ValidationError("sigma_sq must be positive")
        if self.coupling < 0:
            raise ValidationError("coupling must be non-negative")


def _kernel_table(a1: np.ndarray, a2: np.ndarray, omega: float, sigma_sq: float) -> np.ndarray:
    # a1: (m1, dim), a2: (m2, dim)
    if a1.shape[1] == 1:
        diff = a1[:, 0][:, None] - a2[:, 0][None, :]
    else:
        diff = np.linalg.norm(a1[:, None, :] - a2[None, :, :], axis=2)
    return synthetic_edge_affinity(diff, 0.0, omega, sigma_sq)


def build_layer_affinities(
    g1: MultiLayerGraph, g2: MultiLayerGraph, config: KernelConfig
) -> LayerAffinities:
    if g1.n_layers != g2.n_layers:
        raise ValidationError(f"layer count mismatch: {g1.n_layers} vs {g2.n_layers}")
    n_layers = g1.n_layers
    if len(config.omega) != n_layers:
        raise ValidationError(f"need {n_layers} omega values, got {len(config.omega)}")
    if g1.edge_attrs.shape[2] == 0 or g1.edge_attrs.shape[2] != g2.edge_attrs.shape[2]:
        raise ValidationError("edge attribute dimensions missing or inconsistent")

    Kqi = np.stack([
        _kernel_table(g1.edge_attrs[a], g2.edge_attrs[a], config.omega[a], config.sigma_sq)
        for a in range(n_layers)
    ]) if g1.n_edges and g2.n_edges else np.zeros((n_layers, g1.n_edges, g2.n_edges))

    if config.unary:
        Kp = np.stack([
            _kernel_table(g1.vertex_attrs[a], g2.vertex_attrs[a], config.omega[a], config.sigma_sq)
            for a in range(n_layers)
        ])
    else:
        Kp = np.zeros((n_layers, g1.n_vertices, g2.n_vertices))

    m1t, m2t = len(g1.coupling_pairs()), len(g2.coupling_pairs())
    Kqt = np.full((len(layer_pairs(n_layers)), m1t, m2t), float(config.coupling))
    return LayerAffinities(Kp, Kqi, Kqt)


def normalize_layer(block) -> np.ndarray:
    """Scale a non-negative block so its largest entry is 1."""
    block = np.asarray(block, dtype=float)
    top = block.max() if block.size else 0.0
    if top <= 0:
        warnings.warn("affinity block has no positive entry; left unnormalized", ZeroBlockWarning)
        return block.copy()
    return block / top


def integrate_layers(affinities: LayerAffinities) -> tuple[np.ndarray, np.ndarray]:
    """Sum of the individually normalized intra-layer blocks ``(Kp, Kq)``."""
    # all-zero blocks (e.g. unary terms switched off) contribute nothing
    Kp = sum((normalize_layer(b) for b in affinities.Kp if b.any()), np.zeros(affinities.Kp.shape[1:]))
    Kq = sum((normalize_layer(b) for b in affinities.Kqi if b.any()), np.zeros(affinities.Kqi.shape[1:]))
    return Kp, Kq


@dataclass(frozen=True, eq=False)
class MatchingProblem:
    """Two graphs, their affinities and an optional ground truth.

    ``ground_truth[i]`` is the vertex of ``g2`` matched to inlier ``i`` of
    ``g1``; only the first ``len(ground_truth)`` vertices of ``g1`` are
    inliers.
    """

    g1: MultiLayerGraph
    g2: MultiLayerGraph
    affinities: LayerAffinities
    ground_truth: np.ndarray | None = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.g1.n_layers != self.g2.n_layers or self.affinities.n_layers != self.g1.n_layers:
            raise ValidationError("layer counts of graphs and affinities disagree")
        aff = self.affinities
        expect = {
            "Kp": (self.g1.n_vertices, self.g2.n_vertices),
            "Kqi": (self.g1.n_edges, self.g2.n_edges),
            "Kqt": (len(self.g1.coupling_pairs()), len(self.g2.coupling_pairs())),
        }
        for name, shape in expect.items():
            if getattr(aff, name).shape[1:] != shape:
                raise ValidationError(
                    f"{name} blocks have shape {getattr(aff, name).shape[1:]}, expected {shape}"
                )
        if self.ground_truth is not None:
            gt = np.asarray(self.ground_truth, dtype=np.int64)
            if len(gt) > self.g1.n_vertices or (
                len(gt) and (gt.min() < 0 or gt.max() >= self.g2.n_vertices)
            ):
                raise ValidationError("ground truth indices out of range")
            object.__setattr__(self, "ground_truth", gt)

    @property
    def shape(self) -> tuple[int, int]:
        return self.g1.n_vertices, self.g2.n_vertices

    def __eq__(self, other):
        if not isinstance(other, MatchingProblem):
            return NotImplemented
        gt_same = (self.ground_truth is None and other.ground_truth is None) or (
            self.ground_truth is not None
            and other.ground_truth is not None
            and np.array_equal(self.ground_truth, other.ground_truth)
        )
        return (
            self.g1 == other.g1
            and self.g2 == other.g2
            and self.affinities == other.affinities
            and gt_same
            and self.meta == other.meta
        )

    __hash__ = None


@dataclass(frozen=True)
class DummyMapping:
    """Original sizes of a padded problem."""

    n1: int
    n2: int

    def strip(self, X: np.ndarray) -> np.ndarray:
        return np.asarray(X)[: self.n1, : self.n2]


def pad_with_dummies(problem: MatchingProblem) -> tuple[MatchingProblem, DummyMapping]:
    """Square the problem by adding zero-affinity vertices to the smaller graph."""
    n1, n2 = problem.shape
    mapping = DummyMapping(n1, n2)
    if n1 == n2:
        return problem, mapping
    n = max(n1, n2)
    g1, g2 = pad_graph(problem.g1, n), pad_graph(problem.g2, n)
    aff = problem.affinities
    Kp = np.zeros((aff.n_layers, n, n))
    Kp[:, :n1, :n2] = aff.Kp
    m1t, m2t = len(g1.coupling_pairs()), len(g2.coupling_pairs())
    Kqt = np.zeros((aff.Kqt.shape[0], m1t, m2t))
    # default self-coupling appends the dummies' pairs after the originals
    Kqt[:, : aff.Kqt.shape[1], : aff.Kqt.shape[2]] = aff.Kqt
    padded = MatchingProblem(
        g1, g2, LayerAffinities(Kp, aff.Kqi, Kqt), problem.ground_truth, dict(problem.meta)
    )
    return padded, mapping
