"""
Tests for the leave-one-out split and ranking metrics
"""

import math

import numpy as np
import pytest

from swarmrec.core import evaluation
from swarmrec.core.oracles import oracle_metrics
from swarmrec.exceptions import ConfigurationError, InputError
from swarmrec.models.config import EvalProtocol, SplitMode
from swarmrec.models.graph import InteractionStore


def test_split_holds_out_latest(small_store):
    result = evaluation.split(small_store, EvalProtocol(negatives=0))
    assert result.held_out == {"1": "c", "2": "b", "3": "d"}
    assert result.held_out_ratings == {"1": 4.0, "2": 2.0, "3": 5.0}
    assert result.negatives == {}
    train = result.train
    assert train.user_ids == small_store.user_ids
    assert train.item_ids == small_store.item_ids
    assert train.n_entries == small_store.n_entries - 3
    assert "c" not in train.lookup("1")


def test_split_samples_unseen_negatives(small_store):
    result = evaluation.split(small_store, EvalProtocol(negatives=1, seed=3))
    assert result.negatives["1"] == ("d",)
    assert result.negatives["2"][0] in ("c", "d")
    assert result.negatives["3"][0] in ("a", "b")
    assert result.truncated_users == ()


def test_split_truncates_negatives(small_store):
    result = evaluation.split(small_store, EvalProtocol(negatives=5))
    assert result.truncated_users == ("1", "2", "3")
    assert result.negatives["2"] == ("c", "d")


def test_split_excludes_single_interaction_users():
    store = InteractionStore.from_records([("1", "a", 5.0, 1.0), ("1", "b", 4.0, 2.0), ("2", "a", 3.0, 1.0)])
    result = evaluation.split(store, EvalProtocol(negatives=0))
    assert result.excluded_users == ("2",)
    assert list(result.held_out) == ["1"]
    assert result.train.lookup("2") == {"a": 3.0}


def test_split_by_time_ties_take_highest_item():
    store = InteractionStore.from_records([("1", "a", 5.0, 7.0), ("1", "b", 4.0, 7.0), ("1", "c", 4.0, 1.0)])
    assert evaluation.split(store, EvalProtocol(negatives=0)).held_out == {"1": "b"}


def test_split_without_timestamps_falls_back_to_random():
    store = InteractionStore.from_records([("1", "a", 5.0, None), ("1", "b", 4.0, None), ("1", "c", 3.0, None)])
    first = evaluation.split(store, EvalProtocol(negatives=0, seed=9))
    second = evaluation.split(store, EvalProtocol(split=SplitMode.RANDOM, negatives=0, seed=9))
    assert first.held_out == second.held_out


def test_random_split_is_seeded(synthetic_store):
    protocol = EvalProtocol(split=SplitMode.RANDOM, negatives=10, seed=5)
    first = evaluation.split(synthetic_store, protocol)
    second = evaluation.split(synthetic_store, protocol)
    assert first.held_out == second.held_out
    assert first.negatives == second.negatives
    for user, items in first.negatives.items():
        assert not set(items) & set(synthetic_store.lookup(user))


def test_metrics_by_hand():
    report = evaluation.compute_metrics({"u": ["x", "y", "z"]}, {"u": ["y"]}, [1, 2, 3])
    assert report.at(1).model_dump() == {"hr": 0.0, "mrr": 0.0, "ndcg": 0.0, "precision": 0.0, "recall": 0.0}
    at2 = report.at(2)
    assert at2.hr == 1.0
    assert at2.mrr == 0.5
    assert at2.ndcg == pytest.approx(1 / math.log2(3))
    assert at2.precision == 0.5
    assert at2.recall == 1.0
    assert report.at(3).precision == pytest.approx(1 / 3)


def test_graded_ndcg():
    report = evaluation.compute_metrics({"u": ["a", "b"]}, {"u": {"a": 1.0, "b": 3.0}}, [2], graded=True)
    dcg = 1.0 + 7.0 / math.log2(3)
    idcg = 7.0 + 1.0 / math.log2(3)
    assert report.at(2).ndcg == pytest.approx(dcg / idcg)
    binary = evaluation.compute_metrics({"u": ["a", "b"]}, {"u": {"a": 1.0, "b": 3.0}}, [2])
    assert binary.at(2).ndcg == pytest.approx(1.0)


def test_users_without_relevant_items_are_skipped():
    report = evaluation.compute_metrics({"u": ["a"], "v": ["a"]}, {"u": ["a"]}, [1])
    assert report.users_evaluated == 1
    assert report.users_skipped == 1
    assert report.at(1).hr == 1.0


def test_metric_arguments():
    with pytest.raises(InputError):
        evaluation.compute_metrics({"u": ["a", "a"]}, {"u": ["a"]}, [1])
    with pytest.raises(ConfigurationError):
        evaluation.compute_metrics({"u": ["a"]}, {"u": ["a"]}, [0])


@pytest.mark.parametrize("batch", range(20))
def test_metrics_match_oracle(batch):
    # 50 random instances per batch
    for seed in range(50 * batch, 50 * (batch + 1)):
        rng = np.random.default_rng(seed)
        items = [f"i{k}" for k in range(int(rng.integers(5, 31)))]
        rankings, relevant = {}, {}
        for u in range(int(rng.integers(1, 21))):
            rankings[f"u{u}"] = list(rng.permutation(items)[: int(rng.integers(1, len(items) + 1))])
            relevant[f"u{u}"] = list(rng.choice(items, size=int(rng.integers(0, 4)), replace=False))
        k_list = sorted({1, int(rng.integers(2, 11)), 10})
        ours = evaluation.compute_metrics(rankings, relevant, k_list)
        expected = oracle_metrics(rankings, relevant, k_list)
        assert ours.users_evaluated == expected.users_evaluated
        for k in k_list:
            for name, value in expected.at(k).model_dump().items():
                assert getattr(ours.at(k), name) == pytest.approx(value, abs=1e-12)


def test_rank_candidates_breaks_ties_by_index():
    scores = np.array([1.0, 2.0, 2.0, 0.0])
    assert evaluation.rank_candidates(scores, np.array([3, 2, 1])).tolist() == [1, 2, 3]


def test_evaluate_scores_with_perfect_scorer(small_store):
    protocol = EvalProtocol(negatives=1, k_list=[1, 2])
    result = evaluation.split(small_store, protocol)
    train = result.train
    held = {train.user_index[u]: train.item_index[i] for u, i in result.held_out.items()}

    def scorer(users):
        block = np.zeros((len(users), train.n_items))
        for row, user in enumerate(users):
            block[row, held[int(user)]] = 10.0
        return block

    report = evaluation.evaluate_scores(result, scorer, protocol)
    assert report.users_evaluated == 3
    assert report.at(1).hr == 1.0
    assert report.at(1).ndcg == 1.0
    assert report.protocol["negatives"] == 1
    assert report.seed == 42


def test_evaluate_scores_without_negatives_ranks_all_unseen(small_store):
    protocol = EvalProtocol(negatives=0, k_list=[1])
    result = evaluation.split(small_store, protocol)
    candidates = evaluation.candidate_items(result, result.train.user_index["1"])
    assert [result.train.item_ids[i] for i in candidates] == ["c", "d"]
    report = evaluation.evaluate_scores(result, lambda users: np.zeros((len(users), 4)), protocol)
    # all-zero scores rank by item index: users 1 and 2 hold out their first unseen item
    assert report.at(1).hr == pytest.approx(2 / 3)
