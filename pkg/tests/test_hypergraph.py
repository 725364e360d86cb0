"""
Tests for hypergraph construction
"""

import numpy as np
import pytest

from swarmrec.core import hypergraph
from swarmrec.exceptions import ConfigurationError, RangeError
from swarmrec.models.graph import FeatureMatrix, HyperedgeKind, InteractionStore, SocialGraph


def test_co_interaction_one_edge_per_shared_item(small_store):
    h = hypergraph.build_co_interaction(small_store)
    assert h.node_ids == small_store.user_ids
    edges = {e.anchor: h.member_ids(e) for e in h.hyperedges}
    # d has a single rater and gets no hyperedge
    assert edges == {"a": ("1", "2"), "b": ("1", "2"), "c": ("1", "3")}
    assert all(e.kind == HyperedgeKind.CO_INTERACTION for e in h.hyperedges)


def test_co_interaction_window_keeps_trailing_raters():
    store = InteractionStore.from_records(
        [("a", "x", 5.0, 0.0), ("b", "x", 5.0, 90.0), ("c", "x", 5.0, 100.0)]
    )
    h = hypergraph.build_co_interaction(store, window=15.0)
    assert [h.member_ids(e) for e in h.hyperedges] == [("b", "c")]
    assert h.hyperedges[0].window == (85.0, 100.0)


def test_co_interaction_window_needs_timestamps():
    store = InteractionStore.from_records([("a", "x", 5.0, None), ("b", "x", 5.0, None)])
    with pytest.raises(ConfigurationError):
        hypergraph.build_co_interaction(store, window=1.0)


def test_co_preference_groups_similar_nodes():
    features = FeatureMatrix(
        node_ids=("a", "b", "c", "d", "z"),
        values=np.array([[1.0, 0.0], [0.9, 0.1], [0.0, 1.0], [0.1, 1.0], [0.0, 0.0]]),
    )
    h = hypergraph.build_co_preference(features, gamma=0.9)
    groups = sorted(h.member_ids(e) for e in h.hyperedges)
    assert groups == [("a", "b"), ("c", "d")]
    assert all(e.anchor is None for e in h.hyperedges)


def test_co_preference_gamma_one_joins_identical_rows():
    features = FeatureMatrix(node_ids=("a", "b", "c"), values=np.array([[1.0, 2.0], [2.0, 4.0], [1.0, 0.0]]))
    h = hypergraph.build_co_preference(features, gamma=1.0)
    assert [h.member_ids(e) for e in h.hyperedges] == [("a", "b")]


def test_co_preference_gamma_range():
    features = FeatureMatrix(node_ids=("a",), values=np.array([[1.0]]))
    with pytest.raises(RangeError):
        hypergraph.build_co_preference(features, gamma=0.0)


def test_ego_network_includes_edges_among_neighbors():
    social = SocialGraph(
        node_ids=("a", "b", "c", "d"),
        sources=[0, 1, 2, 3],
        targets=[1, 2, 0, 2],
        weights=[1.0, 1.0, 1.0, 1.0],
    )
    ego = hypergraph.ego_network(social, "a")
    assert ego.node_ids == ("a", "b", "c")
    assert sorted((s, t) for s, t, _ in ego.edges()) == [("a", "b"), ("b", "c"), ("c", "a")]


def test_save_hypergraph_lines(tmp_path, small_store):
    h = hypergraph.build_co_interaction(small_store)
    path = hypergraph.save_hypergraph(h, tmp_path / "h.txt")
    assert path.read_text().splitlines()[0] == "co-interaction a 1 2"
