from __future__ import annotations

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from clusterwalk import (
    Cluster,
    EnsembleNoisyOracle,
    ExactOracle,
    InputError,
    MembershipOracle,
    OracleDecision,
    RunAborted,
    TraversalConfig,
    TraversalTrace,
    merge_clusters,
    run_clustering,
    seed_cluster,
    select_candidate,
    select_representatives,
    traverse_component,
)

from conftest import ConstantOracle, HashDecisionOracle, make_graph, small_graphs

YES = OracleDecision.YES
NO = OracleDecision.NO
UNKNOWN = OracleDecision.UNKNOWN


class ScriptedOracle(MembershipOracle):
    """Answers from pre-seeded lists and records every query."""

    descriptor = "scripted"

    def __init__(self, membership=(), merge=()):
        self.membership = list(membership)
        self.merge = list(merge)
        self.log: list[tuple] = []

    def assess_membership(self, query):
        self.log.append(("membership", query.representatives, query.candidate))
        return self.membership.pop(0)

    def assess_merge(self, query):
        self.log.append(("merge", query.representatives_a, query.representatives_b))
        return self.merge.pop(0)


class FlakyOracle(MembershipOracle):
    """Raises on the nth query; earlier queries say Yes."""

    descriptor = "flaky"

    def __init__(self, fail_on: int):
        self.fail_on = fail_on
        self.calls = 0

    def _tick(self):
        self.calls += 1
        if self.calls >= self.fail_on:
            raise RuntimeError("oracle backend fell over")
        return YES

    def assess_membership(self, query):
        return self._tick()

    def assess_merge(self, query):
        return self._tick()


def two_triangles():
    """Two 0.9-weight triangles joined by one 0.65 bridge (c-d)."""
    return make_graph(
        [
            ("a", "b", 0.9), ("a", "c", 0.9), ("b", "c", 0.9),
            ("d", "e", 0.9), ("d", "f", 0.9), ("e", "f", 0.9),
            ("c", "d", 0.65),
        ]
    )


TRIANGLE_LABELS = {"a": "L", "b": "L", "c": "L", "d": "R", "e": "R", "f": "R"}


class TestConfig:
    def test_defaults(self):
        cfg = TraversalConfig()
        assert (cfg.k, cfg.num_candidates, cfg.unknown_retries) == (3, 1, 2)
        assert cfg.merge_strategy == "pairs"

    @pytest.mark.parametrize(
        "kwargs",
        [
            {"k": 0},
            {"num_candidates": 0},
            {"unknown_retries": -1},
            {"merge_strategy": "greedy"},
        ],
    )
    def test_validation(self, kwargs):
        with pytest.raises(InputError):
            TraversalConfig(**kwargs)


class TestCluster:
    def test_basic(self):
        c = Cluster(["a", "b"])
        assert len(c) == 2
        assert "a" in c and "z" not in c
        assert c.representatives == ["a"]
        c.add_member("z")
        assert c.members == ["a", "b", "z"]

    def test_rejects_duplicates_and_empty(self):
        with pytest.raises(InputError):
            Cluster(["a", "a"])
        with pytest.raises(InputError):
            Cluster([])
        c = Cluster(["a"])
        with pytest.raises(InputError):
            c.add_member("a")


class TestSeedAndSelection:
    def test_seed_at_max_weighted_degree(self):
        g = make_graph([("a", "b", 0.9), ("b", "c", 0.8)])
        assert seed_cluster(g, {"a", "b", "c"}).members == ["b"]  # degree 1.7

    def test_seed_restricted_to_component_subset(self):
        g = make_graph([("a", "b", 0.9), ("b", "c", 0.8)])
        # inside {a, b} both see only the 0.9 edge; tie goes to "a"
        assert seed_cluster(g, {"a", "b"}).members == ["a"]

    def test_seed_empty_component(self):
        with pytest.raises(InputError):
            seed_cluster(make_graph([]), set())

    def test_select_candidate(self):
        g = make_graph([("a", "b", 0.9), ("b", "c", 0.8)])
        assert select_candidate(g, Cluster(["b"])) == "a"
        assert select_candidate(g, Cluster(["a", "c"])) == "b"  # 0.9 + 0.8 summed
        assert select_candidate(g, Cluster(["a", "b", "c"])) is None

    def test_select_candidate_tie_breaks_by_id(self):
        g = make_graph([("m", "a", 0.7), ("m", "b", 0.7)])
        assert select_candidate(g, Cluster(["m"])) == "a"

    def test_select_representatives(self):
        g = make_graph([("a", "b", 0.9), ("a", "c", 0.9), ("b", "c", 0.6)])
        # within-degrees: a 1.8, b 1.5, c 1.5
        assert select_representatives(g, ["a", "b", "c"], k=1) == ["a"]
        assert select_representatives(g, ["a", "b", "c"], k=2) == ["a", "b"]
        assert select_representatives(g, ["a", "b", "c"], k=5) == ["a", "b", "c"]

    def test_select_representatives_validation(self):
        g = make_graph([("a", "b", 0.9)])
        with pytest.raises(InputError):
            select_representatives(g, ["a"], k=0)
        with pytest.raises(InputError):
            select_representatives(g, [], k=2)


class TestTwoTriangleRun:
    def test_exact_oracle_full_trace(self):
        g = two_triangles()
        oracle = ExactOracle(TRIANGLE_LABELS)
        clusters, trace = run_clustering(g, oracle)
        assert [c.members for c in clusters] == [["c", "a", "b"], ["d", "e", "f"]]
        assert trace == TraversalTrace(
            membership_assessments=5,
            merge_assessments=1,
            accepts=4,
            rejects=1,
            unknowns=0,
            edges_removed=1,
            merges_performed=0,
        )

    def test_input_graph_untouched(self):
        g = two_triangles()
        before = list(g.edges())
        run_clustering(g, ExactOracle(TRIANGLE_LABELS))
        assert list(g.edges()) == before

    def test_step_log_and_callback(self):
        g = two_triangles()
        seen: list[dict] = []
        clusters, trace = run_clustering(
            g,
            ExactOracle(TRIANGLE_LABELS),
            TraversalConfig(log_steps=True),
            on_step=seen.append,
        )
        assert trace.steps == seen
        assert len(trace.steps) == 6  # 5 membership + 1 merge
        assert trace.steps[0] == {
            "kind": "membership", "cluster": "c", "candidate": "a", "decision": "yes",
        }
        assert trace.steps[-1]["kind"] == "merge"
        assert trace.steps[-1]["decision"] == "no"

    def test_steps_not_collected_by_default(self):
        _, trace = run_clustering(two_triangles(), ExactOracle(TRIANGLE_LABELS))
        assert trace.steps is None


class TestAdversarialOracles:
    def test_always_no_gives_singletons(self):
        g = two_triangles()
        clusters, trace = run_clustering(g, ConstantOracle(NO))
        assert sorted(c.members[0] for c in clusters) == ["a", "b", "c", "d", "e", "f"]
        assert all(len(c) == 1 for c in clusters)
        assert trace.rejects == trace.membership_assessments == 7
        assert trace.edges_removed == 7  # every edge pruned during growth
        # merge memoization: each of C(6,2) singleton pairs is asked exactly once
        assert trace.merge_assessments == 15
        assert trace.merges_performed == 0

    def test_always_unknown_terminates_with_forced_nos(self):
        g = two_triangles()
        retries = 2
        clusters, trace = run_clustering(
            g, ConstantOracle(UNKNOWN), TraversalConfig(unknown_retries=retries)
        )
        assert all(len(c) == 1 for c in clusters)
        # the always-No structure, each query repeated retries + 1 times
        assert trace.membership_assessments == 7 * (retries + 1)
        assert trace.unknowns == trace.membership_assessments
        assert trace.accepts == trace.rejects == 0
        assert trace.merge_assessments == 15 * (retries + 1)
        assert trace.membership_assessments <= 6 + 7 + trace.unknowns

    def test_always_yes_single_cluster(self):
        g = two_triangles()
        clusters, trace = run_clustering(g, ConstantOracle(YES))
        assert len(clusters) == 1
        assert clusters[0].member_set == set("abcdef")
        assert trace.accepts == 5
        assert trace.merges_performed == 0  # one component, nothing to merge


class TestUnknownRetries:
    def test_unknown_unknown_yes(self):
        g = make_graph([("a", "b", 0.9)])
        oracle = ScriptedOracle(membership=[UNKNOWN, UNKNOWN, YES])
        clusters, trace = run_clustering(g, oracle, TraversalConfig(unknown_retries=2))
        assert clusters[0].member_set == {"a", "b"}
        assert trace.membership_assessments == 3
        assert (trace.accepts, trace.rejects, trace.unknowns) == (1, 0, 2)
        # the same query object is re-posed on each retry
        assert oracle.log == [("membership", ("a",), "b")] * 3

    def test_exhausted_unknowns_remove_edges_without_reject(self):
        g = make_graph([("a", "b", 0.9)])
        oracle = ScriptedOracle(membership=[UNKNOWN] * 3, merge=[NO])
        clusters, trace = run_clustering(g, oracle, TraversalConfig(unknown_retries=2))
        assert all(len(c) == 1 for c in clusters)
        assert (trace.accepts, trace.rejects, trace.unknowns) == (0, 0, 3)
        assert trace.edges_removed == 1
        assert trace.merge_assessments == 1

    def test_zero_retries(self):
        g = make_graph([("a", "b", 0.9)])
        oracle = ScriptedOracle(membership=[UNKNOWN], merge=[NO])
        _, trace = run_clustering(g, oracle, TraversalConfig(unknown_retries=0))
        assert trace.membership_assessments == 1
        assert trace.unknowns == 1


class TestBatchedCandidates:
    def test_reject_prunes_edges_into_batch_accepts(self):
        # b seeds; batch {a, c}: a joins, c is rejected against the snapshot
        # reps but pruned against the extended cluster, so a-c goes too.
        g = make_graph([("a", "b", 0.9), ("b", "c", 0.85), ("a", "c", 0.8)])
        labels = {"a": "L", "b": "L", "c": "R"}
        clusters, trace = run_clustering(
            g, ExactOracle(labels), TraversalConfig(num_candidates=2)
        )
        assert [c.member_set for c in clusters] == [{"a", "b"}, {"c"}]
        assert trace.membership_assessments == 2
        assert trace.edges_removed == 2
        assert trace.merge_assessments == 1

    def test_batch_queries_share_representative_snapshot(self):
        g = make_graph([("a", "b", 0.9), ("b", "c", 0.85), ("a", "c", 0.8)])
        oracle = ScriptedOracle(membership=[YES, YES])
        run_clustering(g, oracle, TraversalConfig(num_candidates=2))
        reps_used = [entry[1] for entry in oracle.log if entry[0] == "membership"]
        assert reps_used == [("b",), ("b",)]


class TestMergePhase:
    def test_edgeless_same_label_nodes_reunite(self):
        g = make_graph([], nodes=["x1", "x2", "y1"])
        labels = {"x1": "X", "x2": "X", "y1": "Y"}
        clusters, trace = run_clustering(g, ExactOracle(labels))
        assert sorted((c.member_set for c in clusters), key=min) == [{"x1", "x2"}, {"y1"}]
        assert trace.merges_performed == 1
        assert trace.membership_assessments == 0
        # (x1,x2) merges on the first offer and the scan restarts, so only the
        # merged cluster is ever offered against y1: two assessments total
        assert trace.merge_assessments == 2

    def test_three_distinct_classes_ask_each_pair_once(self):
        g = make_graph([], nodes=["x", "y", "z"])
        labels = {"x": "X", "y": "Y", "z": "Z"}
        _, trace = run_clustering(g, ExactOracle(labels))
        assert trace.merge_assessments == 3
        assert trace.merges_performed == 0

    def test_boundary_weight_orders_pairs(self):
        # hand-built clusters with one positive-boundary pair; the other pairs
        # are zero weight and must follow in min-member-id order
        g = make_graph(
            [("x1", "x2", 0.9), ("y1", "y2", 0.9), ("x2", "y1", 0.8), ("z1", "z2", 0.9)]
        )
        clusters = [
            Cluster(["x1", "x2"]),
            Cluster(["y1", "y2"]),
            Cluster(["z1", "z2"]),
        ]
        oracle = ScriptedOracle(merge=[NO, NO, NO])
        trace = TraversalTrace()
        merge_clusters(g, clusters, oracle, TraversalConfig(), trace)
        offered = [
            tuple(sorted((entry[1][0], entry[2][0]))) for entry in oracle.log
        ]
        assert offered == [("x1", "y1"), ("x1", "z1"), ("y1", "z1")]
        # the No on the bridged pair removed its boundary edge
        assert not g.has_edge("x2", "y1")
        assert trace.edges_removed == 1

    def test_merge_memo_is_purged_when_a_side_changes(self):
        g = make_graph([], nodes=["a1", "b1", "c1"])
        labels = {"a1": "X", "b1": "Y", "c1": "X"}
        clusters, trace = run_clustering(g, ExactOracle(labels))
        assert sorted((c.member_set for c in clusters), key=min) == [{"a1", "c1"}, {"b1"}]
        # (a1,b1) No, (a1,c1) Yes, then the grown cluster is re-offered to b1
        assert trace.merge_assessments == 3
        assert trace.merges_performed == 1

    def test_rounds_strategy_matches_pairs_on_clean_labels(self):
        g = make_graph([], nodes=["x1", "x2", "x3"])
        labels = {"x1": "X", "x2": "X", "x3": "X"}
        pairs_clusters, _ = run_clustering(
            g, ExactOracle(labels), TraversalConfig(merge_strategy="pairs")
        )
        rounds_clusters, rounds_trace = run_clustering(
            g, ExactOracle(labels), TraversalConfig(merge_strategy="rounds")
        )
        assert [c.member_set for c in pairs_clusters] == [{"x1", "x2", "x3"}]
        assert [c.member_set for c in rounds_clusters] == [{"x1", "x2", "x3"}]
        assert rounds_trace.merges_performed == 2

    def test_merge_clusters_skips_singletons(self):
        g = make_graph([("a", "b", 0.9)])
        trace = TraversalTrace()
        only = [Cluster(["a", "b"])]
        assert merge_clusters(g, only, ConstantOracle(YES), TraversalConfig(), trace) == only
        assert trace.merge_assessments == 0


class TestRunClustering:
    def test_empty_graph(self):
        with pytest.raises(InputError):
            run_clustering(make_graph([]), ConstantOracle(YES))

    def test_oracle_failure_wraps_with_partial_trace(self):
        g = make_graph([("a", "b", 0.9), ("b", "c", 0.8)])
        with pytest.raises(RunAborted) as excinfo:
            run_clustering(g, FlakyOracle(fail_on=2))
        err = excinfo.value
        assert isinstance(err.__cause__, RuntimeError)
        assert err.trace.membership_assessments == 1
        assert err.trace.accepts == 1

    def test_exact_recovery_with_noisy_graph_labels(self):
        g = two_triangles()
        clusters, _ = run_clustering(g, ExactOracle(TRIANGLE_LABELS))
        got = {frozenset(c.member_set) for c in clusters}
        assert got == {frozenset("abc"), frozenset("def")}


@given(small_graphs(), st.integers(min_value=0, max_value=10_000))
@settings(max_examples=60, deadline=None)
def test_partition_and_trace_invariants(g, seed):
    oracle = HashDecisionOracle(seed)
    n, e = g.node_count, g.edge_count
    clusters, trace = run_clustering(g, oracle, TraversalConfig(unknown_retries=1))
    covered = [v for c in clusters for v in c.members]
    assert sorted(covered) == sorted(g.nodes)
    assert len(covered) == len(set(covered))
    assert trace.membership_assessments == trace.accepts + trace.rejects + trace.unknowns
    assert trace.membership_assessments <= n + e + trace.unknowns
    for c in clusters:
        assert set(c.representatives) <= c.member_set
        assert 1 <= len(c.representatives) <= 3


@given(small_graphs(max_nodes=8), st.integers(min_value=0, max_value=10_000))
@settings(max_examples=30, deadline=None)
def test_runs_are_deterministic(g, seed):
    oracle = HashDecisionOracle(seed)
    first = run_clustering(g, oracle)
    second = run_clustering(g, oracle)
    assert [c.members for c in first[0]] == [c.members for c in second[0]]
    assert [c.representatives for c in first[0]] == [c.representatives for c in second[0]]
    assert first[1] == second[1]


@given(st.integers(min_value=0, max_value=500))
@settings(max_examples=25, deadline=None)
def test_noisy_oracle_runs_terminate(seed):
    g = two_triangles()
    oracle = EnsembleNoisyOracle(TRIANGLE_LABELS, flip_probability=0.4, seed=seed)
    clusters, trace = run_clustering(g, oracle)
    assert sorted(v for c in clusters for v in c.members) == sorted(g.nodes)
    assert trace.membership_assessments <= 6 + 7 + trace.unknowns
