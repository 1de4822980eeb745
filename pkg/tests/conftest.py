from __future__ import annotations

import hashlib

import numpy as np
from hypothesis import strategies as st

from clusterwalk import (
    EmbeddingRecord,
    MembershipOracle,
    OracleDecision,
    RelationalGraph,
)


def one_hot(i: int, dim: int) -> np.ndarray:
    v = np.zeros(dim)
    v[i] = 1.0
    return v


def make_graph(
    edges, tau: float = 0.5, beta: float = 14.2857, nodes=()
) -> RelationalGraph:
    g = RelationalGraph(tau=tau, beta=beta)
    for n in nodes:
        g.add_node(n)
    for u, v, w in edges:
        g.add_edge(u, v, w)
    return g


def unit_records(vectors, labels=None) -> list[EmbeddingRecord]:
    out = []
    for i, vec in enumerate(vectors):
        v = np.asarray(vec, dtype=np.float64)
        v = v / np.linalg.norm(v)
        label = labels[i] if labels is not None else None
        out.append(EmbeddingRecord(id=f"n{i:03d}", vector=v, label=label))
    return out


@st.composite
def small_graphs(draw, max_nodes: int = 10):
    n = draw(st.integers(min_value=1, max_value=max_nodes))
    ids = [f"n{i:02d}" for i in range(n)]
    edges = []
    for i in range(n):
        for j in range(i + 1, n):
            if draw(st.booleans()):
                w = draw(
                    st.floats(min_value=0.5, max_value=1.0, allow_nan=False, allow_infinity=False)
                )
                edges.append((ids[i], ids[j], w))
    return make_graph(edges, nodes=ids)


class ConstantOracle(MembershipOracle):
    """Always answers the same decision; adversarial baseline."""

    def __init__(self, decision: OracleDecision):
        self.decision = decision
        self.descriptor = f"constant({decision.value})"

    def assess_membership(self, query):
        return self.decision

    def assess_merge(self, query):
        return self.decision


class HashDecisionOracle(MembershipOracle):
    """Deterministic pseudo-random decisions keyed by (seed, query)."""

    def __init__(self, seed: int, unknown_share: float = 0.2):
        self.seed = seed
        self.unknown_share = unknown_share
        self.descriptor = f"hashed({seed})"

    def _decide(self, *parts) -> OracleDecision:
        digest = hashlib.sha256("|".join((str(self.seed),) + parts).encode()).digest()
        u = int.from_bytes(digest[:8], "big") / 2.0**64
        if u < self.unknown_share:
            return OracleDecision.UNKNOWN
        return OracleDecision.YES if u < self.unknown_share + (1 - self.unknown_share) / 2 else OracleDecision.NO

    def assess_membership(self, query):
        return self._decide("m", *query.representatives, query.candidate)

    def assess_merge(self, query):
        return self._decide("g", *query.representatives_a, "/", *query.representatives_b)
