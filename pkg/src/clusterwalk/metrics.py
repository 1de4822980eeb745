"""Partition quality scores against ground-truth labels.

Both scores run off one contingency table, use exact integer pair counts
where possible, and use natural-log entropies for mutual information.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

import numpy as np

from .exceptions import InputError

__all__ = ["ContingencyTable", "contingency_table", "nmi", "rand_index", "NMI_NORMALIZATIONS"]

NMI_NORMALIZATIONS = ("arithmetic", "sqrt", "min", "max")


@dataclass
class ContingencyTable:
    """Cluster-by-class co-occurrence counts.

    Rows follow partition order, columns follow sorted class labels; row sums
    are cluster sizes, column sums class sizes, and the grand total is n.
    """

    counts: np.ndarray
    class_labels: list[str]
    n: int

    @property
    def cluster_sizes(self) -> np.ndarray:
        return self.counts.sum(axis=1)

    @property
    def class_sizes(self) -> np.ndarray:
        return self.counts.sum(axis=0)


def contingency_table(
    partition: Sequence[Iterable[str]], labels: Mapping[str, str]
) -> ContingencyTable:
    """Build the table, validating that the partition is disjoint and covers
    exactly the labeled node set."""
    classes = sorted(set(labels.values()))
    col = {c: j for j, c in enumerate(classes)}
    clusters = [list(c) for c in partition]
    counts = np.zeros((len(clusters), len(classes)), dtype=np.int64)
    seen: set[str] = set()
    for i, cluster in enumerate(clusters):
        for node in cluster:
            if node in seen:
                raise InputError(f"node {node!r} appears in more than one cluster")
            seen.add(node)
            try:
                counts[i, col[labels[node]]] += 1
            except KeyError:
                raise InputError(f"node {node!r} has no label") from None
    if seen != set(labels):
        missing = sorted(set(labels) - seen)[:3]
        raise InputError(f"partition does not cover labeled nodes, e.g. {missing}")
    n = int(counts.sum())
    if n == 0:
        raise InputError("cannot score an empty partition")
    return ContingencyTable(counts=counts, class_labels=classes, n=n)


def _entropy_terms(sizes: Iterable[int], n: int) -> float:
    # sum p * ln(1/p) with both factors formed the same way as the MI terms,
    # so identical partitions cancel exactly.
    return sum((s / n) * math.log(n / s) for s in sizes if s > 0)


def _is_permutation(counts: np.ndarray) -> bool:
    nz = counts > 0
    return bool(np.all(nz.sum(axis=0) == 1) and np.all(nz.sum(axis=1) == 1))


def nmi(
    partition: Sequence[Iterable[str]],
    labels: Mapping[str, str],
    normalization: str = "arithmetic",
) -> float:
    """Normalized mutual information between the partition and the labels.

    Natural-log entropies.  ``normalization`` divides mutual information by
    the arithmetic mean (default), geometric mean ("sqrt"), minimum, or
    maximum of the two entropies.  Conventions: both entropies zero -> 1.0;
    exactly one zero -> 0.0; identical partitions -> exactly 1.0.
    """
    if normalization not in NMI_NORMALIZATIONS:
        raise InputError(f"normalization must be one of {NMI_NORMALIZATIONS}, got {normalization!r}")
    ct = contingency_table(partition, labels)
    n = ct.n
    h_u = _entropy_terms((int(s) for s in ct.cluster_sizes), n)
    h_v = _entropy_terms((int(s) for s in ct.class_sizes), n)
    if h_u == 0.0 and h_v == 0.0:
        return 1.0
    if h_u == 0.0 or h_v == 0.0:
        return 0.0
    if _is_permutation(ct.counts):
        # One-to-one cluster/class correspondence: the partitions are equal,
        # so the score is exactly 1 under every normalization.
        return 1.0
    rows = ct.cluster_sizes
    cols = ct.class_sizes
    info = 0.0
    for i, j in zip(*np.nonzero(ct.counts)):
        nij = int(ct.counts[i, j])
        info += (nij / n) * math.log((n * nij) / (int(rows[i]) * int(cols[j])))
    if normalization == "arithmetic":
        denom = (h_u + h_v) / 2.0
    elif normalization == "sqrt":
        denom = math.sqrt(h_u * h_v)
    elif normalization == "min":
        denom = min(h_u, h_v)
    else:
        denom = max(h_u, h_v)
    return min(1.0, max(0.0, info / denom))


def rand_index(partition: Sequence[Iterable[str]], labels: Mapping[str, str]) -> float:
    """Fraction of node pairs on which partition and labels agree.

    Computed from the contingency table with exact integer combinatorics;
    a single node (no pairs) scores 1.0 by convention.
    """
    ct = contingency_table(partition, labels)
    n = ct.n
    total = n * (n - 1) // 2
    if total == 0:
        return 1.0
    same_both = sum(int(c) * (int(c) - 1) // 2 for c in ct.counts.flat)
    same_pred = sum(int(s) * (int(s) - 1) // 2 for s in ct.cluster_sizes)
    same_true = sum(int(s) * (int(s) - 1) // 2 for s in ct.class_sizes)
    disagreements = (same_pred - same_both) + (same_true - same_both)
    return (total - disagreements) / total
