"""
Tests for the cleaning layer
"""

import math

import numpy as np
import pytest

from swarmrec.core import preprocess
from swarmrec.exceptions import EmptyInputError, InputError, RangeError
from swarmrec.models.config import RunConfig
from swarmrec.models.graph import Hyperedge, HyperedgeKind, Hypergraph, InteractionStore


def test_threshold_keeps_ratings_at_or_above(small_store):
    kept = preprocess.threshold_filter(small_store, 4.0)
    assert sorted(kept.records()) == [
        ("1", "a", 5.0, 1.0),
        ("1", "c", 4.0, 3.0),
        ("2", "a", 4.0, 1.0),
        ("3", "d", 5.0, 4.0),
    ]


def test_threshold_zero_is_identity(small_store):
    assert preprocess.threshold_filter(small_store, 0.0) is small_store


def test_threshold_out_of_range(small_store):
    with pytest.raises(RangeError):
        preprocess.threshold_filter(small_store, 5.5)


def test_anomaly_scores_weight_variance_by_activity(small_store):
    scores = preprocess.anomaly_scores(small_store)
    # user 1: ratings 5, 3, 4 -> variance 2/3, most active
    assert scores["1"] == pytest.approx(2 / 3)
    # user 2: ratings 4, 2 -> variance 1, weight 2/3
    assert scores["2"] == pytest.approx(2 / 3)
    # user 3: ratings 1, 5 -> variance 4, weight 2/3
    assert scores["3"] == pytest.approx(8 / 3)


def test_single_rating_user_scores_zero():
    store = InteractionStore.from_records([("a", "x", 5.0, None), ("b", "x", 1.0, None), ("b", "y", 5.0, None)])
    assert preprocess.anomaly_scores(store)["a"] == 0.0


def test_exclude_anomalies_removes_every_entry_of_flagged_users(small_store):
    scores = preprocess.anomaly_scores(small_store)
    kept = preprocess.exclude_anomalies(small_store, scores, phi=1.0)
    assert kept.user_ids == ("1", "2")
    assert preprocess.flag_anomalies(scores, 1.0) == {"3": pytest.approx(8 / 3)}


def test_exclude_anomalies_needs_every_score(small_store):
    with pytest.raises(InputError):
        preprocess.exclude_anomalies(small_store, {"1": 0.0}, phi=1.0)


def test_degree_filter_single_pass(small_store):
    kept = preprocess.degree_filter(small_store, min_user_interactions=3)
    assert kept.user_ids == ("1",)
    assert kept.n_entries == 3


def test_trust_from_rating_differences(small_store):
    trust = preprocess.trust_scores(small_store)
    # users 1 and 2 co-rate a (5 vs 4) and b (3 vs 2): constant difference
    assert trust.get("1", "2") == pytest.approx(1.0)
    # users 1 and 3 co-rate only c: a single difference has zero variance
    assert trust.get("1", "3") == pytest.approx(1.0)
    assert trust.get("2", "3") is None


def test_trust_penalizes_inconsistent_pairs():
    store = InteractionStore.from_records(
        [("a", "x", 5.0, None), ("a", "y", 1.0, None), ("b", "x", 1.0, None), ("b", "y", 5.0, None)]
    )
    # differences +4 and -4: variance 16
    assert preprocess.trust_scores(store).get("a", "b") == pytest.approx(math.exp(-16))


def test_trust_window_counts_only_close_co_ratings():
    store = InteractionStore.from_records(
        [
            ("a", "x", 5.0, 0.0),
            ("a", "y", 1.0, 0.0),
            ("b", "x", 4.0, 5.0),
            ("b", "y", 5.0, 100.0),
        ]
    )
    assert preprocess.trust_scores(store, window=10.0).get("a", "b") == pytest.approx(1.0)
    assert preprocess.trust_scores(store).get("a", "b") < 1.0


def test_trust_window_needs_timestamps():
    store = InteractionStore.from_records([("a", "x", 5.0, None), ("b", "x", 4.0, None)])
    with pytest.raises(InputError):
        preprocess.trust_scores(store, window=1.0)


def test_remove_isolated_counts_nodes():
    h = Hypergraph(
        node_ids=("a", "b", "c"),
        hyperedges=(Hyperedge(members=[0, 2], kind=HyperedgeKind.CO_INTERACTION, anchor="x"),),
    )
    kept, report = preprocess.remove_isolated(h)
    assert kept.node_ids == ("a", "c")
    assert report.removed_isolated == 1
    assert report.removed_isolated_ids == ["b"]


def test_clean_report_balances(synthetic_store):
    cfg = RunConfig(threshold=4.0, phi=0.5, min_user_interactions=2)
    cleaned, report, trust = preprocess.clean(synthetic_store, cfg)
    assert report.input_entries == synthetic_store.n_entries
    assert report.kept_entries == cleaned.n_entries
    assert cleaned.ratings.min() >= 4.0
    assert set(trust.node_ids) == set(cleaned.user_ids)


def test_clean_everything_removed(small_store):
    with pytest.raises(EmptyInputError):
        preprocess.clean(small_store, RunConfig(threshold=5.0, min_user_interactions=5))


def test_clean_never_keeps_flagged_users(synthetic_store):
    scores = preprocess.anomaly_scores(synthetic_store)
    cfg = RunConfig(threshold=0.0, phi=float(np.median(list(scores.values()))))
    cleaned, report, _ = preprocess.clean(synthetic_store, cfg)
    assert not set(report.flagged_anomalies) & set(cleaned.user_ids)
    assert np.all(cleaned.ratings >= 0)
