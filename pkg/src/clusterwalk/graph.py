"""Weighted similarity graph over embedding vectors.

Nodes are string ids; an undirected edge between two nodes carries the sigmoid
of the scaled dot product of their unit-norm embeddings and is retained only
when that weight reaches the threshold ``tau`` (inclusive).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Iterator, Mapping

import numpy as np

from .exceptions import InputError

DEFAULT_TAU = 0.6
DEFAULT_BETA = 14.2857
# Scale factors above this are clamped before use.
BETA_CLAMP = 100.0

__all__ = [
    "DEFAULT_TAU",
    "DEFAULT_BETA",
    "BETA_CLAMP",
    "EmbeddingRecord",
    "RelationalGraph",
    "compute_edge_weight",
    "build_graph",
    "connected_components",
    "weighted_degree",
    "cluster_neighborhood",
    "remove_cluster_candidate_edges",
]


@dataclass(eq=False)
class EmbeddingRecord:
    """One embedded item: stable id, unit-norm float64 vector, optional label."""

    id: str
    vector: np.ndarray
    label: str | None = None

    def __eq__(self, other) -> bool:
        if not isinstance(other, EmbeddingRecord):
            return NotImplemented
        return (
            self.id == other.id
            and self.label == other.label
            and self.vector.shape == other.vector.shape
            and bool(np.all(self.vector == other.vector))
        )

    def __repr__(self) -> str:
        return f"EmbeddingRecord(id={self.id!r}, dim={self.vector.shape[0]}, label={self.label!r})"


def _sigmoid(x: float) -> float:
    # Branch keeps exp() arguments non-positive so neither side can overflow.
    if x >= 0.0:
        return 1.0 / (1.0 + math.exp(-x))
    e = math.exp(x)
    return e / (1.0 + e)


def _check_beta(beta: float) -> float:
    if not (isinstance(beta, (int, float)) and math.isfinite(beta)) or beta <= 0:
        raise InputError(f"beta must be a positive finite number, got {beta!r}")
    return min(float(beta), BETA_CLAMP)


def _check_tau(tau: float) -> float:
    if not (isinstance(tau, (int, float)) and math.isfinite(tau)) or not 0.0 <= tau <= 1.0:
        raise InputError(f"tau must lie in [0, 1], got {tau!r}")
    return float(tau)


def compute_edge_weight(h_u: np.ndarray, h_v: np.ndarray, beta: float = DEFAULT_BETA) -> float:
    """Sigmoid of the scaled dot product of two unit-norm vectors.

    Symmetric in its vector arguments and strictly inside (0, 1) away from
    float saturation.  ``beta`` is clamped at ``BETA_CLAMP``.
    """
    b = _check_beta(beta)
    u = np.asarray(h_u, dtype=np.float64)
    v = np.asarray(h_v, dtype=np.float64)
    if u.ndim != 1 or v.ndim != 1 or u.shape != v.shape:
        raise InputError(f"vector shape mismatch: {u.shape} vs {v.shape}")
    if not (np.all(np.isfinite(u)) and np.all(np.isfinite(v))):
        raise InputError("embedding vectors must be finite")
    return _sigmoid(b * float(np.dot(u, v)))


class RelationalGraph:
    """Undirected weighted graph with a retention threshold.

    Every stored edge satisfies ``tau <= weight <= 1``.  Node and edge
    iteration order is insertion order; callers that need a canonical order
    sort explicitly.
    """

    __slots__ = ("tau", "beta", "_adj")

    def __init__(self, tau: float = DEFAULT_TAU, beta: float = DEFAULT_BETA):
        self.tau = _check_tau(tau)
        _check_beta(beta)
        self.beta = float(beta)
        self._adj: dict[str, dict[str, float]] = {}

    # -- nodes ------------------------------------------------------------

    @property
    def nodes(self):
        """Set-like read-only view of node ids."""
        return self._adj.keys()

    @property
    def node_count(self) -> int:
        return len(self._adj)

    def add_node(self, u: str) -> None:
        if not isinstance(u, str) or not u:
            raise InputError(f"node id must be a non-empty string, got {u!r}")
        self._adj.setdefault(u, {})

    def has_node(self, u: str) -> bool:
        return u in self._adj

    def _require_node(self, u: str):
        if u not in self._adj:
            raise InputError(f"unknown node {u!r}")

    # -- edges ------------------------------------------------------------

    @property
    def edge_count(self) -> int:
        return sum(len(nbrs) for nbrs in self._adj.values()) // 2

    def add_edge(self, u: str, v: str, weight: float) -> None:
        """Insert an undirected edge; nodes are created as needed."""
        if u == v:
            raise InputError(f"self loop on {u!r} not allowed")
        if not (isinstance(weight, (int, float)) and math.isfinite(weight)):
            raise InputError(f"edge weight must be finite, got {weight!r}")
        if not 0.0 < weight <= 1.0:
            raise InputError(f"edge weight must lie in (0, 1], got {weight!r}")
        if weight < self.tau:
            raise InputError(f"edge weight {weight!r} below retention threshold {self.tau!r}")
        self.add_node(u)
        self.add_node(v)
        self._adj[u][v] = float(weight)
        self._adj[v][u] = float(weight)

    def has_edge(self, u: str, v: str) -> bool:
        return u in self._adj and v in self._adj[u]

    def weight(self, u: str, v: str) -> float:
        self._require_node(u)
        self._require_node(v)
        try:
            return self._adj[u][v]
        except KeyError:
            raise InputError(f"no edge between {u!r} and {v!r}") from None

    def remove_edge(self, u: str, v: str) -> None:
        self._require_node(u)
        self._require_node(v)
        if v not in self._adj[u]:
            raise InputError(f"no edge between {u!r} and {v!r}")
        del self._adj[u][v]
        del self._adj[v][u]

    def neighbors(self, u: str) -> Mapping[str, float]:
        """Read-only neighbor-id -> weight mapping for ``u``."""
        self._require_node(u)
        return self._adj[u]

    def edges(self) -> Iterator[tuple[str, str, float]]:
        """Yield edges as (u, v, weight), u < v, sorted lexicographically."""
        pairs = [
            (u, v, w)
            for u, nbrs in self._adj.items()
            for v, w in nbrs.items()
            if u < v
        ]
        return iter(sorted(pairs))

    # -- misc -------------------------------------------------------------

    def degree(self, v: str, within: Iterable[str] | None = None) -> float:
        return weighted_degree(self, v, within)

    def density(self) -> float:
        n = self.node_count
        if n < 2:
            return 0.0
        return 2.0 * self.edge_count / (n * (n - 1))

    def copy(self) -> "RelationalGraph":
        g = RelationalGraph(tau=self.tau, beta=self.beta)
        g._adj = {u: dict(nbrs) for u, nbrs in self._adj.items()}
        return g


def build_graph(
    embeddings: Iterable[EmbeddingRecord],
    beta: float = DEFAULT_BETA,
    tau: float = DEFAULT_TAU,
) -> RelationalGraph:
    """Assemble the thresholded similarity graph over all record pairs.

    Every record becomes a node (isolated nodes included); a pair gets an edge
    exactly when ``compute_edge_weight`` reaches ``tau``.  Cost is O(n^2 * d).
    """
    records = list(embeddings)
    if not records:
        raise InputError("cannot build a graph from zero embedding records")
    tau = _check_tau(tau)
    b = _check_beta(beta)

    g = RelationalGraph(tau=tau, beta=beta)
    vecs: list[np.ndarray] = []
    dim: int | None = None
    for r in records:
        if g.has_node(r.id):
            raise InputError(f"duplicate node id {r.id!r}")
        v = np.asarray(r.vector, dtype=np.float64)
        if v.ndim != 1:
            raise InputError(f"record {r.id!r}: vector must be one-dimensional")
        if dim is None:
            dim = v.shape[0]
        elif v.shape[0] != dim:
            raise InputError(f"record {r.id!r}: dimension {v.shape[0]} != {dim}")
        if not np.all(np.isfinite(v)):
            raise InputError(f"record {r.id!r}: vector has non-finite entries")
        norm = float(np.linalg.norm(v))
        if abs(norm - 1.0) > 1e-6:
            raise InputError(f"record {r.id!r}: vector norm {norm:.8f} is not 1 (load_embeddings normalizes)")
        g.add_node(r.id)
        vecs.append(v)

    ids = [r.id for r in records]
    n = len(records)
    for i in range(n):
        vi = vecs[i]
        ui = ids[i]
        for j in range(i + 1, n):
            # Same scalar path as compute_edge_weight so stored weights match it bit-for-bit.
            w = _sigmoid(b * float(np.dot(vi, vecs[j])))
            if w >= tau:
                g.add_edge(ui, ids[j], w)
    return g


def connected_components(g: RelationalGraph) -> list[set[str]]:
    """Connected components as node-id sets, ordered by smallest member id."""
    seen: set[str] = set()
    components: list[set[str]] = []
    # Iterating ids in sorted order means each component is first entered at its
    # smallest member, so the output list is already ordered.
    for start in sorted(g.nodes):
        if start in seen:
            continue
        comp = {start}
        stack = [start]
        while stack:
            u = stack.pop()
            for v in g.neighbors(u):
                if v not in comp:
                    comp.add(v)
                    stack.append(v)
        seen |= comp
        components.append(comp)
    return components


def weighted_degree(g: RelationalGraph, v: str, within: Iterable[str] | None = None) -> float:
    """Sum of incident edge weights, optionally counting only neighbors in ``within``."""
    g._require_node(v)
    nbrs = g.neighbors(v)
    if within is None:
        return float(sum(nbrs.values()))
    allowed = within if isinstance(within, (set, frozenset, dict)) else set(within)
    return float(sum(w for u, w in nbrs.items() if u in allowed))


def cluster_neighborhood(g: RelationalGraph, s: Iterable[str]) -> set[str]:
    """Union of the members' neighbors, minus the members themselves."""
    members = s if isinstance(s, (set, frozenset)) else set(s)
    out: set[str] = set()
    for u in members:
        g._require_node(u)
        out.update(g.neighbors(u))
    return out - set(members)


def remove_cluster_candidate_edges(g: RelationalGraph, s: Iterable[str], v: str) -> int:
    """Delete every edge between ``v`` and the members of ``s``; return the count."""
    members = s if isinstance(s, (set, frozenset)) else set(s)
    if v in members:
        raise InputError(f"candidate {v!r} is already a member of the cluster")
    g._require_node(v)
    targets = [u for u in g.neighbors(v) if u in members]
    for u in targets:
        g.remove_edge(u, v)
    return len(targets)
