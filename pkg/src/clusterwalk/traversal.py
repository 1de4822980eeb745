"""Cluster expansion by oracle-guided graph traversal, plus the global merge pass.

Each connected component is consumed cluster by cluster: seed at the highest
weighted degree, repeatedly offer the best-connected neighbor to the oracle,
grow on Yes, prune the candidate's edges into the cluster on No.  When a
component is exhausted the finished clusters enter a merge phase that offers
cluster pairs to the oracle in boundary-weight order.

All tie-breaking is lexicographic on node ids, so a run is a pure function of
(graph, oracle, config).
"""

from __future__ import annotations

import heapq
import itertools
from dataclasses import dataclass, field
from typing import Callable, Iterable, Sequence

from .exceptions import ClusterwalkError, InputError, RunAborted
from .graph import (
    RelationalGraph,
    cluster_neighborhood,
    connected_components,
    remove_cluster_candidate_edges,
    weighted_degree,
)
from .oracles import MembershipOracle, MembershipQuery, MergeQuery, OracleDecision

__all__ = [
    "TraversalConfig",
    "TraversalTrace",
    "Cluster",
    "seed_cluster",
    "select_candidate",
    "select_representatives",
    "traverse_component",
    "merge_clusters",
    "run_clustering",
]

MERGE_STRATEGIES = ("pairs", "rounds")

StepCallback = Callable[[dict], None]


@dataclass
class TraversalConfig:
    """Run parameters.

    ``k`` bounds the representative set, ``num_candidates`` batches membership
    queries per step, ``unknown_retries`` is how many times an Unknown answer
    is re-asked before being treated as No.  ``seed`` is recorded for
    provenance and consumed by seeded oracles; the engine itself draws no
    randomness.  ``merge_strategy`` picks the merge ordering: "pairs" ranks
    all cluster pairs globally, "rounds" gives each cluster one best candidate
    per round.
    """

    k: int = 3
    num_candidates: int = 1
    unknown_retries: int = 2
    seed: int = 0
    aspect: str = ""
    log_steps: bool = False
    merge_strategy: str = "pairs"

    def __post_init__(self):
        if self.k < 1:
            raise InputError(f"k must be >= 1, got {self.k}")
        if self.num_candidates < 1:
            raise InputError(f"num_candidates must be >= 1, got {self.num_candidates}")
        if self.unknown_retries < 0:
            raise InputError(f"unknown_retries must be >= 0, got {self.unknown_retries}")
        if self.merge_strategy not in MERGE_STRATEGIES:
            raise InputError(
                f"merge_strategy must be one of {MERGE_STRATEGIES}, got {self.merge_strategy!r}"
            )


@dataclass
class TraversalTrace:
    """Counters accumulated over a run.

    Every oracle query increments exactly one of accepts/rejects/unknowns (for
    membership) so ``membership_assessments == accepts + rejects + unknowns``
    always holds.  ``steps`` is populated only when per-step logging is on.
    """

    membership_assessments: int = 0
    merge_assessments: int = 0
    accepts: int = 0
    rejects: int = 0
    unknowns: int = 0
    edges_removed: int = 0
    merges_performed: int = 0
    steps: list[dict] | None = None


class Cluster:
    """Members in insertion order plus the current representative list."""

    __slots__ = ("members", "member_set", "representatives")

    def __init__(self, members: Iterable[str], representatives: Sequence[str] | None = None):
        self.members: list[str] = list(members)
        self.member_set: set[str] = set(self.members)
        if len(self.member_set) != len(self.members):
            raise InputError("cluster members must be unique")
        if not self.members:
            raise InputError("cluster cannot be empty")
        self.representatives: list[str] = list(representatives) if representatives else [self.members[0]]

    def add_member(self, node: str) -> None:
        if node in self.member_set:
            raise InputError(f"{node!r} is already a member")
        self.members.append(node)
        self.member_set.add(node)

    def __contains__(self, node: str) -> bool:
        return node in self.member_set

    def __len__(self) -> int:
        return len(self.members)

    def __eq__(self, other) -> bool:
        if not isinstance(other, Cluster):
            return NotImplemented
        return self.members == other.members and self.representatives == other.representatives

    def __repr__(self) -> str:
        return f"Cluster(members={self.members!r}, representatives={self.representatives!r})"


def seed_cluster(g: RelationalGraph, component: Iterable[str]) -> Cluster:
    """Start a cluster at the component node with the largest weighted degree
    inside the component (ties to the smallest id)."""
    nodes = component if isinstance(component, (set, frozenset)) else set(component)
    if not nodes:
        raise InputError("cannot seed a cluster from an empty component")
    seed = min(nodes, key=lambda v: (-weighted_degree(g, v, nodes), v))
    return Cluster([seed], [seed])


def select_candidate(g: RelationalGraph, cluster: Cluster) -> str | None:
    """Neighborhood node with the largest summed weight into the cluster,
    ties to the smallest id; None when the neighborhood is empty."""
    frontier = cluster_neighborhood(g, cluster.member_set)
    if not frontier:
        return None
    def score(v: str) -> float:
        return sum(w for u, w in g.neighbors(v).items() if u in cluster.member_set)
    return min(frontier, key=lambda v: (-score(v), v))


def select_representatives(g: RelationalGraph, members: Sequence[str], k: int) -> list[str]:
    """Top min(k, len(members)) members by weighted degree inside the member
    set, ordered by falling degree then ascending id."""
    if k < 1:
        raise InputError(f"k must be >= 1, got {k}")
    member_set = set(members)
    if not member_set:
        raise InputError("cannot pick representatives of an empty cluster")
    ranked = sorted(member_set, key=lambda v: (-weighted_degree(g, v, member_set), v))
    return ranked[: min(k, len(ranked))]


def _log(trace: TraversalTrace, on_step: StepCallback | None, record: dict) -> None:
    if trace.steps is not None:
        trace.steps.append(record)
    if on_step is not None:
        on_step(record)


def _assess_membership(
    oracle: MembershipOracle,
    representatives: tuple[str, ...],
    candidate: str,
    config: TraversalConfig,
    trace: TraversalTrace,
    on_step: StepCallback | None,
    cluster_seed: str,
) -> OracleDecision:
    """Query with Unknown retries; returns YES or NO (forced No after retries)."""
    query = MembershipQuery(representatives, candidate, config.aspect)
    for attempt in range(config.unknown_retries + 1):
        decision = oracle.assess_membership(query)
        trace.membership_assessments += 1
        if decision is OracleDecision.YES:
            trace.accepts += 1
        elif decision is OracleDecision.NO:
            trace.rejects += 1
        else:
            trace.unknowns += 1
        _log(trace, on_step, {
            "kind": "membership",
            "cluster": cluster_seed,
            "candidate": candidate,
            "decision": decision.value,
        })
        if decision is not OracleDecision.UNKNOWN:
            return decision
    # Retries exhausted: treat as No (edge removal) without counting a reject,
    # since no query actually answered No.
    return OracleDecision.NO

def _assess_merge(
    oracle: MembershipOracle,
    reps_a: tuple[str, ...],
    reps_b: tuple[str, ...],
    config: TraversalConfig,
    trace: TraversalTrace,
    on_step: StepCallback | None,
    anchor_a: str,
    anchor_b: str,
) -> OracleDecision:
    query = MergeQuery(reps_a, reps_b, config.aspect)
    for attempt in range(config.unknown_retries + 1):
        decision = oracle.assess_merge(query)
        trace.merge_assessments += 1
        _log(trace, on_step, {
            "kind": "merge",
            "cluster": anchor_a,
            "candidate": anchor_b,
            "decision": decision.value,
        })
        if decision is not OracleDecision.UNKNOWN:
            return decision
    return OracleDecision.NO


def traverse_component(
    g: RelationalGraph,
    component: Iterable[str],
    oracle: MembershipOracle,
    config: TraversalConfig,
    trace: TraversalTrace,
    on_step: StepCallback | None = None,
) -> list[Cluster]:
    """Consume one component into clusters, mutating ``g`` as edges are pruned.

    The frontier map carries each neighborhood node's summed weight into the
    current cluster and is updated incrementally as members join or candidates
    are pruned, so a component costs O(V + E) edge operations overall.
    """
    remaining = set(component)
    for v in remaining:
        g._require_node(v)
    clusters: list[Cluster] = []
    while remaining:
        cluster = seed_cluster(g, remaining)
        seed = cluster.members[0]
        frontier: dict[str, float] = {
            nbr: w for nbr, w in g.neighbors(seed).items() if nbr in remaining
        }
        while frontier:
            if config.num_candidates == 1:
                batch = [min(frontier.items(), key=lambda kv: (-kv[1], kv[0]))[0]]
            else:
                ranked = sorted(frontier.items(), key=lambda kv: (-kv[1], kv[0]))
                batch = [v for v, _ in ranked[: config.num_candidates]]
            reps = tuple(cluster.representatives)
            accepted: list[str] = []
            rejected: list[str] = []
            for candidate in batch:
                decision = _assess_membership(
                    oracle, reps, candidate, config, trace, on_step, seed
                )
                (accepted if decision is OracleDecision.YES else rejected).append(candidate)
            for node in accepted:
                cluster.add_member(node)
                frontier.pop(node, None)
                for nbr, w in g.neighbors(node).items():
                    if nbr in remaining and nbr not in cluster.member_set:
                        frontier[nbr] = frontier.get(nbr, 0.0) + w
            if accepted:
                cluster.representatives = select_representatives(g, cluster.members, config.k)
            for node in rejected:
                # Rejected after the batch's accepts joined, so edges into the
                # just-extended cluster are pruned too.
                removed = remove_cluster_candidate_edges(g, cluster.member_set, node)
                trace.edges_removed += removed
                frontier.pop(node, None)
        clusters.append(cluster)
        remaining -= cluster.member_set
    return clusters


def _min_id(cluster: Cluster) -> str:
    return min(cluster.member_set)


def _boundary_weights(
    g: RelationalGraph, clusters: list[Cluster]
) -> dict[tuple[int, int], float]:
    """Summed inter-cluster edge weight for every cluster index pair with any."""
    owner: dict[str, int] = {}
    for idx, c in enumerate(clusters):
        for node in c.members:
            owner[node] = idx
    weights: dict[tuple[int, int], float] = {}
    for u, v, w in g.edges():
        iu, iv = owner.get(u), owner.get(v)
        if iu is None or iv is None or iu == iv:
            continue
        key = (iu, iv) if iu < iv else (iv, iu)
        weights[key] = weights.get(key, 0.0) + w
    return weights


def _remove_boundary_edges(g: RelationalGraph, a: Cluster, b: Cluster) -> int:
    small, big = (a, b) if len(a) <= len(b) else (b, a)
    targets = [
        (u, v)
        for u in small.members
        for v in g.neighbors(u)
        if v in big.member_set
    ]
    for u, v in targets:
        g.remove_edge(u, v)
    return len(targets)


def _memo_key(a: Cluster, b: Cluster) -> frozenset:
    return frozenset((tuple(a.representatives), tuple(b.representatives)))


def _purge_memo(memo: set[frozenset], *rep_tuples: tuple[str, ...]) -> None:
    stale = [entry for entry in memo if any(t in entry for t in rep_tuples)]
    for entry in stale:
        memo.discard(entry)


def merge_clusters(
    g: RelationalGraph,
    clusters: Sequence[Cluster],
    oracle: MembershipOracle,
    config: TraversalConfig,
    trace: TraversalTrace,
    on_step: StepCallback | None = None,
) -> list[Cluster]:
    """Offer cluster pairs to the oracle until no merge is accepted.

    A No answer is memoized against the two representative tuples (and the
    pair's boundary edges are removed), so a pair is only re-asked after one
    side has changed.  An accepted merge unions member lists (left side first),
    recomputes representatives, and restarts the scan.
    """
    result = list(clusters)
    if len(result) < 2:
        return result
    memo: set[frozenset] = set()
    if config.merge_strategy == "rounds":
        _merge_rounds(g, result, oracle, config, trace, on_step, memo)
        return result

    # The restart-scan is realized lazily through a heap.  A live entry's rank
    # can only go stale if one of its sides merges (the entry is then dead and
    # discarded on pop) or if its own No pruned the boundary (the pair is then
    # memoized and discarded on pop), so the first live non-memoized pop always
    # equals the first offer of a fresh top-down scan.
    owner: dict[str, Cluster] = {}
    for c in result:
        for node in c.members:
            owner[node] = c
    pair_w: dict[frozenset[int], float] = {}
    for u, v, w in g.edges():
        cu, cv = owner.get(u), owner.get(v)
        if cu is None or cv is None or cu is cv:
            continue
        key = frozenset((id(cu), id(cv)))
        pair_w[key] = pair_w.get(key, 0.0) + w

    def entry(a: Cluster, b: Cluster) -> tuple:
        ids = sorted((_min_id(a), _min_id(b)))
        w = pair_w.get(frozenset((id(a), id(b))), 0.0)
        return (-w, ids[0], ids[1], id(a), id(b))

    live: dict[int, Cluster] = {id(c): c for c in result}
    heap = [entry(a, b) for a, b in itertools.combinations(result, 2)]
    heapq.heapify(heap)
    while heap:
        _, _, _, oa, ob = heapq.heappop(heap)
        a, b = live.get(oa), live.get(ob)
        if a is None or b is None:
            continue
        if _memo_key(a, b) in memo:
            continue
        decision = _assess_merge(
            oracle,
            tuple(a.representatives),
            tuple(b.representatives),
            config,
            trace,
            on_step,
            _min_id(a),
            _min_id(b),
        )
        if decision is not OracleDecision.YES:
            memo.add(_memo_key(a, b))
            trace.edges_removed += _remove_boundary_edges(g, a, b)
            pair_w.pop(frozenset((oa, ob)), None)
            continue
        i, j = result.index(a), result.index(b)
        _apply_merge(g, result, i, j, config, trace, memo)
        merged = result[min(i, j)]
        del live[oa], live[ob]
        for node in merged.members:
            owner[node] = merged
        for other_id, other in live.items():
            w = pair_w.pop(frozenset((oa, other_id)), 0.0)
            w += pair_w.pop(frozenset((ob, other_id)), 0.0)
            if w:
                pair_w[frozenset((id(merged), other_id))] = w
            heapq.heappush(heap, entry(merged, other))
        live[id(merged)] = merged
    return result


def _apply_merge(
    g: RelationalGraph,
    clusters: list[Cluster],
    i: int,
    j: int,
    config: TraversalConfig,
    trace: TraversalTrace,
    memo: set[frozenset],
) -> None:
    i, j = (i, j) if i < j else (j, i)
    a, b = clusters[i], clusters[j]
    _purge_memo(memo, tuple(a.representatives), tuple(b.representatives))
    merged = Cluster(a.members + b.members)
    merged.representatives = select_representatives(g, merged.members, config.k)
    clusters[i] = merged
    del clusters[j]
    trace.merges_performed += 1


def _merge_rounds(
    g: RelationalGraph,
    clusters: list[Cluster],
    oracle: MembershipOracle,
    config: TraversalConfig,
    trace: TraversalTrace,
    on_step: StepCallback | None,
    memo: set[frozenset],
) -> None:
    """Round-based ordering: each round, every cluster nominates its single
    best-connected partner; nominations are assessed once each, then accepted
    merges are applied together."""
    while True:
        weights = _boundary_weights(g, clusters)
        nominations: list[tuple[int, int]] = []
        seen: set[frozenset] = set()
        for i, cluster in enumerate(clusters):
            candidates = sorted(
                (j for j in range(len(clusters)) if j != i),
                key=lambda j: (
                    -weights.get((min(i, j), max(i, j)), 0.0),
                    _min_id(clusters[j]),
                ),
            )
            for j in candidates:
                key = _memo_key(cluster, clusters[j])
                if key in memo or key in seen:
                    continue
                seen.add(key)
                nominations.append((min(i, j), max(i, j)))
                break
        if not nominations:
            return
        to_merge: list[tuple[int, int]] = []
        for i, j in nominations:
            a, b = clusters[i], clusters[j]
            decision = _assess_merge(
                oracle,
                tuple(a.representatives),
                tuple(b.representatives),
                config,
                trace,
                on_step,
                _min_id(a),
                _min_id(b),
            )
            if decision is OracleDecision.YES:
                to_merge.append((i, j))
            else:
                memo.add(_memo_key(a, b))
                trace.edges_removed += _remove_boundary_edges(g, a, b)
        if not to_merge:
            continue
        # Apply accepted merges highest index first so earlier positions stay
        # valid; skip any nomination whose side already merged this round.
        consumed: set[int] = set()
        for i, j in sorted(to_merge, key=lambda ij: ij[1], reverse=True):
            if i in consumed or j in consumed:
                continue
            _apply_merge(g, clusters, i, j, config, trace, memo)
            consumed.update((i, j))


def run_clustering(
    g: RelationalGraph,
    oracle: MembershipOracle,
    config: TraversalConfig | None = None,
    on_step: StepCallback | None = None,
) -> tuple[list[Cluster], TraversalTrace]:
    """Cluster the whole graph: traverse every component, then merge globally.

    Works on a copy of ``g`` (the caller's graph is untouched), so identical
    inputs always reproduce identical results.  Oracle failures abort the run
    wrapped in RunAborted with the partial trace attached.
    """
    config = config or TraversalConfig()
    if g.node_count == 0:
        raise InputError("cannot cluster an empty graph")
    work = g.copy()
    trace = TraversalTrace(steps=[] if config.log_steps else None)
    try:
        clusters: list[Cluster] = []
        for component in connected_components(work):
            clusters.extend(
                traverse_component(work, component, oracle, config, trace, on_step)
            )
        final = merge_clusters(work, clusters, oracle, config, trace, on_step)
    except Exception as exc:
        raise RunAborted(f"clustering aborted: {exc}", trace=trace) from exc
    assigned: set[str] = set()
    for cluster in final:
        overlap = assigned & cluster.member_set
        if overlap:
            raise ClusterwalkError(f"partition invariant violated: {sorted(overlap)[:3]} assigned twice")
        assigned |= cluster.member_set
    if assigned != set(work.nodes):
        missing = sorted(set(work.nodes) - assigned)[:3]
        raise ClusterwalkError(f"partition invariant violated: {missing} unassigned")
    return final, trace
