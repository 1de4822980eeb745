"""Planted-partition dataset generator and graph noise diagnostics."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Mapping

import numpy as np

from .exceptions import ConfigurationError, InputError
from .graph import EmbeddingRecord, RelationalGraph
from .io import DatasetManifest

__all__ = ["PlantedSpec", "generate_dataset", "graph_noise_report"]

# Total prototype draws allowed before the separation constraint is declared infeasible.
_PROTOTYPE_ATTEMPTS = 5000


@dataclass(frozen=True)
class PlantedSpec:
    """Recipe for a labeled synthetic embedding dataset.

    Class prototypes are sampled on the unit sphere until every pairwise dot
    product is below ``min_prototype_separation``; each point is its class
    prototype plus isotropic gaussian noise, re-normalized.  ``class_balance``
    gives per-class proportions (default: as even as possible).
    """

    n_nodes: int
    n_classes: int
    dimension: int
    noise_sigma: float
    seed: int
    class_balance: tuple[float, ...] | None = None
    min_prototype_separation: float = 0.5

    def __post_init__(self):
        if self.n_nodes < 1:
            raise InputError(f"n_nodes must be >= 1, got {self.n_nodes}")
        if not 1 <= self.n_classes <= self.n_nodes:
            raise InputError(f"n_classes must lie in [1, n_nodes], got {self.n_classes}")
        if self.dimension < 2:
            raise InputError(f"dimension must be >= 2, got {self.dimension}")
        if not (math.isfinite(self.noise_sigma) and self.noise_sigma >= 0):
            raise InputError(f"noise_sigma must be >= 0, got {self.noise_sigma!r}")
        if not -1.0 <= self.min_prototype_separation <= 1.0:
            raise InputError(
                f"min_prototype_separation must lie in [-1, 1], got {self.min_prototype_separation!r}"
            )
        if self.class_balance is not None:
            if len(self.class_balance) != self.n_classes:
                raise InputError("class_balance length must equal n_classes")
            if any(not (math.isfinite(p) and p > 0) for p in self.class_balance):
                raise InputError("class_balance entries must be positive")
            if abs(sum(self.class_balance) - 1.0) > 1e-9:
                raise InputError("class_balance must sum to 1")


def _sample_prototypes(rng: np.random.Generator, spec: PlantedSpec) -> list[np.ndarray]:
    prototypes: list[np.ndarray] = []
    attempts = 0
    while len(prototypes) < spec.n_classes:
        if attempts >= _PROTOTYPE_ATTEMPTS:
            raise ConfigurationError(
                f"could not place {spec.n_classes} prototypes in dimension {spec.dimension} "
                f"with pairwise dot < {spec.min_prototype_separation} "
                f"after {_PROTOTYPE_ATTEMPTS} draws"
            )
        attempts += 1
        candidate = rng.standard_normal(spec.dimension)
        norm = np.linalg.norm(candidate)
        if norm == 0.0:
            continue
        candidate /= norm
        if all(float(np.dot(candidate, p)) < spec.min_prototype_separation for p in prototypes):
            prototypes.append(candidate)
    return prototypes


def _class_counts(spec: PlantedSpec) -> list[int]:
    if spec.class_balance is None:
        base, extra = divmod(spec.n_nodes, spec.n_classes)
        return [base + (1 if i < extra else 0) for i in range(spec.n_classes)]
    # Largest-remainder rounding; remainder ties go to the lower class index.
    raw = [p * spec.n_nodes for p in spec.class_balance]
    counts = [int(math.floor(x)) for x in raw]
    order = sorted(range(spec.n_classes), key=lambda i: (-(raw[i] - counts[i]), i))
    for i in order[: spec.n_nodes - sum(counts)]:
        counts[i] += 1
    if any(c == 0 for c in counts):
        raise InputError("class_balance leaves at least one class empty at this n_nodes")
    return counts


def generate_dataset(
    spec: PlantedSpec, name: str = "planted", aspect: str = "synthetic"
) -> tuple[list[EmbeddingRecord], DatasetManifest]:
    """Deterministically generate the dataset described by ``spec``.

    The same spec always yields bit-identical records (PCG64 stream keyed by
    ``spec.seed``).  Node ids are zero-padded so lexicographic order equals
    generation order; classes are assigned in contiguous blocks.
    """
    rng = np.random.default_rng(spec.seed)
    prototypes = _sample_prototypes(rng, spec)
    counts = _class_counts(spec)
    width = max(4, len(str(spec.n_nodes - 1)))
    records: list[EmbeddingRecord] = []
    index = 0
    for cls, count in enumerate(counts):
        label = f"class_{cls}"
        proto = prototypes[cls]
        for _ in range(count):
            vec = proto + spec.noise_sigma * rng.standard_normal(spec.dimension)
            norm = float(np.linalg.norm(vec))
            if norm == 0.0:
                raise ConfigurationError("degenerate zero-norm sample; adjust noise_sigma")
            records.append(
                EmbeddingRecord(id=f"n{index:0{width}d}", vector=vec / norm, label=label)
            )
            index += 1
    manifest = DatasetManifest(
        name=name,
        aspect=aspect,
        embeddings_path="embeddings.jsonl",
        dimension=spec.dimension,
        label_set=[f"class_{c}" for c in range(spec.n_classes)],
    )
    return records, manifest


def graph_noise_report(g: RelationalGraph, labels: Mapping[str, str]) -> dict:
    """How faithfully the thresholded graph reflects the labels.

    Returns wrong_edge_fraction (cross-class share of retained edges; 0.0 for
    an edgeless graph), missing_intra_pairs (same-class pairs with no path
    inside their class subgraph), and components_per_class.
    """
    wrong = 0
    total = 0
    for u, v, _ in g.edges():
        total += 1
        if _label(labels, u) != _label(labels, v):
            wrong += 1

    by_class: dict[str, list[str]] = {}
    for node in g.nodes:
        by_class.setdefault(_label(labels, node), []).append(node)

    missing = 0
    components_per_class: dict[str, int] = {}
    for cls in sorted(by_class):
        nodes = set(by_class[cls])
        comp_sizes = []
        unvisited = set(nodes)
        while unvisited:
            start = unvisited.pop()
            comp = {start}
            stack = [start]
            while stack:
                u = stack.pop()
                for nbr in g.neighbors(u):
                    if nbr in unvisited:
                        unvisited.discard(nbr)
                        comp.add(nbr)
                        stack.append(nbr)
            comp_sizes.append(len(comp))
        components_per_class[cls] = len(comp_sizes)
        size = len(nodes)
        missing += size * (size - 1) // 2 - sum(s * (s - 1) // 2 for s in comp_sizes)

    return {
        "wrong_edge_fraction": (wrong / total) if total else 0.0,
        "missing_intra_pairs": missing,
        "components_per_class": components_per_class,
    }


def _label(labels: Mapping[str, str], node: str) -> str:
    try:
        return labels[node]
    except KeyError:
        raise InputError(f"node {node!r} has no label") from None
