"""
Tests for the pydantic data models
"""

import numpy as np
import pytest
from pydantic import ValidationError

from swarmrec.models.features import CentralityVector
from swarmrec.models.graph import (
    DedupRule,
    Hyperedge,
    HyperedgeKind,
    Hypergraph,
    InteractionStore,
    SimpleGraph,
    SocialGraph,
    canonical_ids,
)
from swarmrec.models.reports import BatchPlan, CleanReport, KMetrics, MetricsReport, Recommendations, TrustTable


def test_canonical_ids_order_numbers_numerically():
    assert canonical_ids(["10", "2", "b", "a", "2"]) == ("2", "10", "a", "b")


def test_store_keep_max_resolves_duplicates():
    store = InteractionStore.from_records(
        [("u", "i", 2.0, None), ("u", "i", 4.0, None), ("u", "i", 3.0, None)],
        dedup_rule=DedupRule.KEEP_MAX,
    )
    assert store.n_entries == 1
    assert store.ratings[0] == 4.0
    assert store.duplicates_resolved == 2


def test_store_keep_last_resolves_duplicates():
    store = InteractionStore.from_records(
        [("u", "i", 4.0, None), ("u", "i", 2.0, None)],
        dedup_rule=DedupRule.KEEP_LAST,
    )
    assert store.ratings[0] == 2.0


def test_store_rejects_out_of_range_rating():
    with pytest.raises(ValidationError):
        InteractionStore(user_ids=("u",), item_ids=("i",), users=[0], items=[0], ratings=[6.0])


def test_store_rejects_repeated_pair():
    with pytest.raises(ValidationError):
        InteractionStore(user_ids=("u",), item_ids=("i",), users=[0, 0], items=[0, 0], ratings=[1.0, 2.0])


def test_store_drops_partial_timestamps():
    store = InteractionStore.from_records([("u", "i", 1.0, 5.0), ("u", "j", 1.0, None)])
    assert not store.has_timestamps


def test_store_is_read_only(small_store):
    with pytest.raises(ValueError):
        small_store.ratings[0] = 1.0


def test_select_compacts_universe(small_store):
    kept = small_store.select(small_store.ratings >= 4)
    assert kept.user_ids == ("1", "2", "3")
    assert kept.item_ids == ("a", "c", "d")
    assert kept.lookup("1") == {"a": 5.0, "c": 4.0}


def test_select_without_compaction_keeps_universe(small_store):
    kept = small_store.select(small_store.ratings >= 5, compact=False)
    assert kept.user_ids == small_store.user_ids
    assert kept.item_ids == small_store.item_ids
    assert kept.n_entries == 2


def test_matrix_matches_entries(small_store):
    dense = small_store.matrix().toarray()
    assert dense.shape == (3, 4)
    assert dense[0].tolist() == [5.0, 3.0, 4.0, 0.0]
    assert small_store.matrix(binary=True).sum() == 7


def test_social_graph_to_simple_graph_restricts_universe():
    social = SocialGraph(node_ids=("a", "b", "c"), sources=[0, 1], targets=[1, 2], weights=[0.5, 1.0])
    g = social.to_simple_graph(["a", "b"])
    assert g.node_ids == ("a", "b")
    assert g.n_edges == 1
    assert g.adjacency[0, 1] == 0.5


def test_hyperedge_needs_two_members():
    with pytest.raises(ValidationError):
        Hyperedge(members=[1, 1], kind=HyperedgeKind.CO_PREFERENCE)


def test_co_interaction_hyperedge_needs_anchor():
    with pytest.raises(ValidationError):
        Hyperedge(members=[0, 1], kind=HyperedgeKind.CO_INTERACTION)


def test_hypergraph_restrict_drops_small_edges():
    h = Hypergraph(
        node_ids=("a", "b", "c", "d"),
        hyperedges=(
            Hyperedge(members=[0, 1, 2], kind=HyperedgeKind.CO_INTERACTION, anchor="x"),
            Hyperedge(members=[2, 3], kind=HyperedgeKind.CO_PREFERENCE),
        ),
    )
    restricted = h.restrict(np.array([True, True, False, True]))
    assert restricted.node_ids == ("a", "b", "d")
    assert [e.members for e in restricted.hyperedges] == [(0, 1)]


def test_simple_graph_keeps_max_weight_of_repeated_edges():
    g = SimpleGraph.from_edges(["a", "b"], [(0, 1, 0.2), (1, 0, 0.7)])
    assert g.adjacency[0, 1] == 0.7
    assert g.adjacency[1, 0] == 0.7
    assert g.n_edges == 1


def test_simple_graph_union_requires_same_universe():
    a = SimpleGraph.from_edges(["a", "b"], [(0, 1, 1.0)])
    b = SimpleGraph.from_edges(["a", "c"], [(0, 1, 1.0)])
    with pytest.raises(ValueError):
        a.union(b)


def test_centrality_normalized_constant_column_is_zero():
    cent = CentralityVector(node_ids=("a", "b"), degree=[1, 1], closeness=[0.5, 1.0], betweenness=[0, 0])
    normalized = cent.normalized()
    assert normalized[:, 0].tolist() == [0.0, 1.0]
    assert normalized[:, 1].tolist() == [0.0, 0.0]


def test_centrality_frame_columns():
    cent = CentralityVector(node_ids=("a",), degree=[0], closeness=[0], betweenness=[0])
    assert list(cent.to_frame().columns) == [
        "node", "degree", "closeness", "betweenness", "deg_norm", "close_norm", "betw_norm"
    ]


def test_clean_report_must_balance():
    with pytest.raises(ValidationError):
        CleanReport(input_entries=10, kept_entries=5, removed_below_threshold=3)


def test_clean_report_combine_adds_counts():
    first = CleanReport(input_entries=10, kept_entries=7, removed_below_threshold=3)
    second = CleanReport(removed_isolated=2, removed_isolated_ids=["x", "y"])
    combined = first.combine(second)
    assert combined.removed_isolated == 2
    assert combined.kept_entries == 7


def test_trust_table_rejects_asymmetry():
    with pytest.raises(ValidationError):
        TrustTable(node_ids=("a", "b"), matrix=np.array([[0.0, 0.5], [0.4, 0.0]]))


def test_trust_table_aligned_reindexes():
    table = TrustTable(node_ids=("a", "b"), matrix=np.array([[0.0, 0.5], [0.5, 0.0]]))
    assert table.get("a", "b") == 0.5
    assert table.get("a", "zz") is None
    aligned = table.aligned(["b", "z", "a"]).toarray()
    assert aligned[0, 2] == 0.5
    assert aligned[1].sum() == 0


def test_batch_plan_rejects_bad_label():
    with pytest.raises(ValidationError):
        BatchPlan(node_ids=("a", "b"), assignment=[0, 2], n_batches=2)


def test_batch_plan_batches_cover_nodes():
    plan = BatchPlan(node_ids=("a", "b", "c"), assignment=[1, 0, 1], n_batches=2)
    assert [b.tolist() for b in plan.batches()] == [[1], [0, 2]]
    assert plan.sizes() == [1, 2]


def _k(hr, recall=None):
    recall = hr if recall is None else recall
    return KMetrics(hr=hr, mrr=hr, ndcg=hr, precision=hr, recall=recall)


def test_metrics_report_rejects_decreasing_hr():
    with pytest.raises(ValidationError):
        MetricsReport(metrics={"1": _k(0.5), "5": _k(0.4)}, users_evaluated=2)


def test_metrics_out_of_range():
    with pytest.raises(ValidationError):
        _k(1.5)


def test_recommendation_lines():
    recs = Recommendations(k=2, lists={"u": [("a", 0.5), ("b", 0.25)]})
    assert recs.lines() == ["u a 0.5 1", "u b 0.25 2"]
