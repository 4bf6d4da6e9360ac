"""Multi-layer graph model and the incidence matrices used by the factorization.

Vectorization is column-major throughout: for an ``N1 x N2`` assignment ``X``
the candidate ``(i, a)`` sits at position ``i + N1 * a`` of ``vec(X)``.
Layer blocks of the supra-adjacency are ordered by layer index, and ordered
inter-layer pairs ``(alpha, beta)`` with ``alpha != beta`` are enumerated
lexicographically.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from itertools import permutations

import numpy as np


class ValidationError(ValueError):
    """Raised when an input violates a structural contract."""


def _as_pairs(pairs) -> np.ndarray:
    arr = np.asarray(pairs, dtype=np.int64)
    if arr.size == 0:
        return np.zeros((0, 2), dtype=np.int64)
    if arr.ndim != 2 or arr.shape[1] != 2:
        raise ValidationError(f"edge list must have shape (m, 2), got {arr.shape}")
    return arr


def _as_attrs(values, n_layers: int, n_items: int, what: str) -> np.ndarray:
    if values is None:
        return np.zeros((n_layers, n_items, 0))
    arr = np.asarray(values, dtype=float)
    if arr.ndim == 2:
        arr = arr[..., None]
    if arr.ndim != 3 or arr.shape[:2] != (n_layers, n_items):
        raise ValidationError(
            f"{what} must have shape ({n_layers}, {n_items}[, dim]), got {arr.shape}"
        )
    return arr


@dataclass(frozen=True, eq=False)
class MultiLayerGraph:
    """A graph whose layers share one directed edge topology.

    ``edge_attrs`` has shape ``(n_layers, n_edges, dim)`` and ``vertex_attrs``
    has shape ``(n_layers, n_vertices, dim)``; scalar attributes may be passed
    as 2-d arrays. ``inter_pairs`` lists the vertex pairs linked across
    layers; ``None`` means every vertex is coupled with itself.
    """

    n_vertices: int
    n_layers: int
    intra_edges: np.ndarray
    edge_attrs: np.ndarray = None
    vertex_attrs: np.ndarray = None
    inter_pairs: np.ndarray | None = None

    def __post_init__(self):
        if self.n_vertices < 0 or self.n_layers < 1:
            raise ValidationError("need n_vertices >= 0 and n_layers >= 1")
        edges = _as_pairs(self.intra_edges)
        _check_edge_list(edges, self.n_vertices, allow_loops=False)
        if len({(int(i), int(j)) for i, j in edges}) != len(edges):
            raise ValidationError("duplicate directed edge in intra_edges")
        object.__setattr__(self, "intra_edges", edges)
        object.__setattr__(
            self,
            "edge_attrs",
            _as_attrs(self.edge_attrs, self.n_layers, len(edges), "edge_attrs"),
        )
        object.__setattr__(
            self,
            "vertex_attrs",
            _as_attrs(self.vertex_attrs, self.n_layers, self.n_vertices, "vertex_attrs"),
        )
        if self.inter_pairs is not None:
            inter = _as_pairs(self.inter_pairs)
            _check_edge_list(inter, self.n_vertices, allow_loops=True)
            object.__setattr__(self, "inter_pairs", inter)
        for arr in (self.intra_edges, self.edge_attrs, self.vertex_attrs, self.inter_pairs):
            if arr is not None:
                arr.flags.writeable = False

    @property
    def n_edges(self) -> int:
        return len(self.intra_edges)

    def coupling_pairs(self) -> np.ndarray:
        """Inter-layer vertex pairs, defaulting to self-coupling."""
        if self.inter_pairs is None:
            idx = np.arange(self.n_vertices)
            return np.stack([idx, idx], axis=1)
        return self.inter_pairs

    def __eq__(self, other):
        if not isinstance(other, MultiLayerGraph):
            return NotImplemented
        same_inter = (self.inter_pairs is None and other.inter_pairs is None) or (
            self.inter_pairs is not None
            and other.inter_pairs is not None
            and np.array_equal(self.inter_pairs, other.inter_pairs)
        )
        return (
            self.n_vertices == other.n_vertices
            and self.n_layers == other.n_layers
            and np.array_equal(self.intra_edges, other.intra_edges)
            and np.array_equal(self.edge_attrs, other.edge_attrs)
            and np.array_equal(self.vertex_attrs, other.vertex_attrs)
            and same_inter
        )

    __hash__ = None


def _check_edge_list(edges: np.ndarray, n: int, allow_loops: bool):
    if len(edges) == 0:
        return
    if edges.min() < 0 or edges.max() >= n:
        raise ValidationError(f"edge endpoint out of range for {n} vertices")
    if not allow_loops and np.any(edges[:, 0] == edges[:, 1]):
        raise ValidationError("self-loops are not allowed in intra_edges")


def complete_digraph(n: int) -> np.ndarray:
    """All ordered pairs ``(i, j)``, ``i != j``, in lexicographic order."""
    return np.array(list(permutations(range(n), 2)), dtype=np.int64).reshape(-1, 2)


@dataclass(frozen=True)
class Assignment:
    """An ``N1 x N2`` matching matrix, either relaxed or 0/1."""

    matrix: np.ndarray
    mode: str = "continuous"
    tol: float = field(default=1e-9, repr=False)

    def __post_init__(self):
        X = np.asarray(self.matrix, dtype=float)
        if X.ndim != 2:
            raise ValidationError("assignment must be a matrix")
        if self.mode not in ("continuous", "binary"):
            raise ValidationError(f"unknown assignment mode {self.mode!r}")
        if self.mode == "binary":
            if not np.all((X == 0) | (X == 1)):
                raise ValidationError("binary assignment has entries outside {0, 1}")
            limit = 1.0
        else:
            if X.size and (X.min() < -self.tol or X.max() > 1 + self.tol):
                raise ValidationError("continuous assignment has entries outside [0, 1]")
            limit = 1.0 + self.tol
        if X.size and (X.sum(axis=1).max() > limit or X.sum(axis=0).max() > limit):
            raise ValidationError("row or column sum exceeds 1")
        X = X.copy()
        X.flags.writeable = False
        object.__setattr__(self, "matrix", X)

    @classmethod
    def from_permutation(cls, perm, n2: int | None = None) -> "Assignment":
        perm = np.asarray(perm, dtype=np.int64)
        X = np.zeros((len(perm), len(perm) if n2 is None else n2))
        rows = np.flatnonzero(perm >= 0)
        X[rows, perm[rows]] = 1.0
        return cls(X, "binary")

    def to_permutation(self) -> np.ndarray:
        """Column matched to each row, ``-1`` where the row is unmatched."""
        X = self.matrix
        perm = np.full(X.shape[0], -1, dtype=np.int64)
        rows, cols = np.nonzero(X > 0.5)
        perm[rows] = cols
        return perm


@dataclass(frozen=True)
class IncidenceBundle:
    """Edge and layer incidence matrices of a graph pair (all 0/1 floats)."""

    G1i: np.ndarray
    H1i: np.ndarray
    G2i: np.ndarray
    H2i: np.ndarray
    G1t: np.ndarray
    H1t: np.ndarray
    G2t: np.ndarray
    H2t: np.ndarray
    LGi: np.ndarray
    LHi: np.ndarray
    LGt: np.ndarray
    LHt: np.ndarray

    @property
    def n_layers(self) -> int:
        return self.LGi.shape[0]

    @property
    def n_pairs(self) -> int:
        return self.LGt.shape[1]

    @property
    def shape(self) -> tuple[int, int]:
        return self.G1i.shape[0], self.G2i.shape[0]


def _encode(pairs: np.ndarray, n: int) -> tuple[np.ndarray, np.ndarray]:
    m = len(pairs)
    G = np.zeros((n, m))
    H = np.zeros((n, m))
    if m:
        cols = np.arange(m)
        G[pairs[:, 0], cols] = 1.0
        H[pairs[:, 1], cols] = 1.0
    return G, H


def build_edge_incidence(graph: MultiLayerGraph) -> tuple[np.ndarray, np.ndarray]:
    """Start (``G``) and end (``H``) incidence of the intra-layer edges."""
    return _encode(graph.intra_edges, graph.n_vertices)


def build_inter_edge_incidence(graph: MultiLayerGraph, pairs=None) -> tuple[np.ndarray, np.ndarray]:
    """Incidence of the inter-layer vertex pairs.

    ``pairs`` overrides the graph's own coupling list; by default every
    vertex is linked to itself so both matrices are the identity.
    """
    if pairs is None:
        pairs = graph.coupling_pairs()
    else:
        pairs = _as_pairs(pairs)
        _check_edge_list(pairs, graph.n_vertices, allow_loops=True)
    return _encode(pairs, graph.n_vertices)


def layer_pairs(n_layers: int) -> list[tuple[int, int]]:
    return [(a, b) for a in range(n_layers) for b in range(n_layers) if a != b]


def build_layer_incidence(n_layers: int):
    """Return ``(LGi, LHi, LGt, LHt)`` for ``n_layers`` layers."""
    if n_layers < 1:
        raise ValidationError("n_layers must be >= 1")
    LGi = np.eye(n_layers)
    LHi = np.eye(n_layers)
    pairs = layer_pairs(n_layers)
    LGt = np.zeros((n_layers, len(pairs)))
    LHt = np.zeros((n_layers, len(pairs)))
    for col, (a, b) in enumerate(pairs):
        LGt[a, col] = 1.0
        LHt[b, col] = 1.0
    return LGi, LHi, LGt, LHt


def build_incidences(g1: MultiLayerGraph, g2: MultiLayerGraph) -> IncidenceBundle:
    if g1.n_layers != g2.n_layers:
        raise ValidationError(
            f"layer count mismatch: {g1.n_layers} vs {g2.n_layers}"
        )
    G1i, H1i = build_edge_incidence(g1)
    G2i, H2i = build_edge_incidence(g2)
    G1t, H1t = build_inter_edge_incidence(g1)
    G2t, H2t = build_inter_edge_incidence(g2)
    LGi, LHi, LGt, LHt = build_layer_incidence(g1.n_layers)
    return IncidenceBundle(G1i, H1i, G2i, H2i, G1t, H1t, G2t, H2t, LGi, LHi, LGt, LHt)


def pad_graph(graph: MultiLayerGraph, n: int) -> MultiLayerGraph:
    """Append isolated dummy vertices up to ``n`` vertices.

    Dummies get zero attributes and, when the coupling list is explicit, no
    inter-layer pairs.
    """
    extra = n - graph.n_vertices
    if extra < 0:
        raise ValidationError("cannot pad to fewer vertices")
    if extra == 0:
        return graph
    va = graph.vertex_attrs
    va = np.concatenate([va, np.zeros((va.shape[0], extra, va.shape[2]))], axis=1)
    return MultiLayerGraph(
        n_vertices=n,
        n_layers=graph.n_layers,
        intra_edges=graph.intra_edges,
        edge_attrs=graph.edge_attrs,
        vertex_attrs=va,
        inter_pairs=graph.inter_pairs,
    )
