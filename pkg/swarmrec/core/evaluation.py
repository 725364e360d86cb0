"""
Leave-one-out evaluation: train/test split, candidate ranking and top-K metrics
"""

import logging
import math
from typing import Callable, Dict, Mapping, Optional, Sequence, Tuple, Union

import numpy as np

from ..exceptions import ConfigurationError, InputError
from ..models.config import EvalProtocol, SplitMode
from ..models.graph import InteractionStore
from ..models.reports import KMetrics, MetricsReport, SplitResult

logger = logging.getLogger(__name__)

Relevant = Union[Sequence[str], Mapping[str, float]]
Scorer = Callable[[np.ndarray], np.ndarray]


def _user_rng(seed: int, user: int) -> np.random.Generator:
    return np.random.default_rng([seed, user])


def split(store: InteractionStore, protocol: EvalProtocol) -> SplitResult:
    """
    Hold out one interaction per user and sample negatives

    by-time holds out the latest entry (ties: highest item index); random
    draws it with a per-user generator seeded from ``protocol.seed``. Users
    with fewer than two interactions stay in training and are not evaluated.
    Negatives are items the user never interacted with; users with fewer
    unseen items than requested keep all of them and are listed as
    truncated. The training store keeps the full user and item universe.

    Without timestamps a by-time split falls back to random with a warning.
    """
    mode = protocol.split
    if mode == SplitMode.BY_TIME and not store.has_timestamps:
        logger.warning("Ratings carry no timestamps; holding out random interactions instead")
        mode = SplitMode.RANDOM

    keep = np.ones(store.n_entries, dtype=bool)
    held_out: Dict[str, str] = {}
    held_out_ratings: Dict[str, float] = {}
    negatives: Dict[str, Tuple[str, ...]] = {}
    excluded, truncated = [], []
    all_items = np.arange(store.n_items)

    for user in range(store.n_users):
        span = store.entry_slice(user)
        count = span.stop - span.start
        user_id = store.user_ids[user]
        if count < 2:
            excluded.append(user_id)
            continue
        rng = _user_rng(protocol.seed, user)
        if mode == SplitMode.BY_TIME:
            stamps = store.timestamps[span]
            items = store.items[span]
            pick = int(np.lexsort((items, stamps))[-1])
        else:
            pick = int(rng.integers(count))
        position = span.start + pick
        keep[position] = False
        held_out[user_id] = store.item_ids[store.items[position]]
        held_out_ratings[user_id] = float(store.ratings[position])

        if protocol.negatives:
            unseen = np.setdiff1d(all_items, store.items[span], assume_unique=True)
            if len(unseen) < protocol.negatives:
                truncated.append(user_id)
                chosen = unseen
            else:
                chosen = np.sort(rng.choice(unseen, size=protocol.negatives, replace=False))
            negatives[user_id] = tuple(store.item_ids[i] for i in chosen)

    if excluded:
        logger.info(f"{len(excluded)} users with fewer than two interactions are not evaluated")
    if truncated:
        logger.warning(f"{len(truncated)} users have fewer than {protocol.negatives} unseen items")
    return SplitResult(
        train=store.select(keep, compact=False),
        held_out=held_out,
        held_out_ratings=held_out_ratings,
        negatives=negatives,
        excluded_users=tuple(excluded),
        truncated_users=tuple(truncated),
    )


def _relevance(relevant: Relevant, graded: bool) -> Dict[str, float]:
    if isinstance(relevant, Mapping):
        return {item: (float(rel) if graded else 1.0) for item, rel in relevant.items()}
    return {item: 1.0 for item in relevant}


def compute_metrics(
    rankings: Mapping[str, Sequence[str]],
    relevant: Mapping[str, Relevant],
    k_list: Sequence[int],
    graded: bool = False,
    config: Optional[dict] = None,
    protocol: Optional[dict] = None,
    seed: Optional[int] = None,
) -> MetricsReport:
    """
    HR, MRR, NDCG, Precision and Recall at every cutoff, averaged over users

    Relevance is binary unless ``graded``, in which case the values of a
    mapping in ``relevant`` are the gains (2^rel - 1). MRR@K counts a first
    relevant item only within the top K. Users without relevant items are
    skipped and counted.

    Raises:
        InputError: A ranking lists an item twice
        ConfigurationError: A cutoff below 1
    """
    cutoffs = sorted(set(int(k) for k in k_list))
    if not cutoffs or cutoffs[0] < 1:
        raise ConfigurationError("cutoffs K must be positive integers")
    per_k: Dict[int, Dict[str, list]] = {
        k: {"hr": [], "mrr": [], "ndcg": [], "precision": [], "recall": []} for k in cutoffs
    }
    skipped = 0
    for user, ranking in rankings.items():
        gains = _relevance(relevant.get(user, ()), graded)
        if not gains:
            skipped += 1
            continue
        if len(set(ranking)) != len(ranking):
            raise InputError(f"ranking of user {user} lists an item twice")
        ideal = sorted(gains.values(), reverse=True)
        for k in cutoffs:
            top = ranking[:k]
            hits = [position for position, item in enumerate(top, start=1) if item in gains]
            dcg = math.fsum((2.0 ** gains[top[p - 1]] - 1.0) / math.log2(p + 1) for p in hits)
            idcg = math.fsum((2.0 ** g - 1.0) / math.log2(p + 1) for p, g in enumerate(ideal[:k], start=1))
            bucket = per_k[k]
            bucket["hr"].append(1.0 if hits else 0.0)
            bucket["mrr"].append(1.0 / hits[0] if hits else 0.0)
            bucket["ndcg"].append(dcg / idcg if idcg > 0 else 0.0)
            bucket["precision"].append(len(hits) / k)
            bucket["recall"].append(len(hits) / len(gains))

    evaluated = len(rankings) - skipped
    metrics = {}
    for k in cutoffs:
        averages = {
            name: (math.fsum(values) / evaluated if evaluated else 0.0)
            for name, values in per_k[k].items()
        }
        metrics[str(k)] = KMetrics(**{name: min(1.0, value) for name, value in averages.items()})
    if skipped:
        logger.info(f"Skipped {skipped} users without relevant items")
    return MetricsReport(
        metrics=metrics,
        users_evaluated=evaluated,
        users_skipped=skipped,
        config=config or {},
        protocol=protocol or {},
        seed=seed,
    )


def rank_candidates(scores: np.ndarray, candidates: np.ndarray) -> np.ndarray:
    """Candidate item indices by descending score, ties by ascending item index"""
    candidates = np.sort(np.asarray(candidates, dtype=np.int64))
    return candidates[np.argsort(-scores[candidates], kind="stable")]


def candidate_items(split_result: SplitResult, user: int) -> np.ndarray:
    """Held-out item plus negatives, or every item the user has not trained on"""
    train: InteractionStore = split_result.train
    user_id = train.user_ids[user]
    held = train.item_index[split_result.held_out[user_id]]
    if user_id in split_result.negatives:
        others = [train.item_index[i] for i in split_result.negatives[user_id]]
        return np.array([held] + others, dtype=np.int64)
    return np.setdiff1d(np.arange(train.n_items), train.rated_items(user), assume_unique=True)


def evaluate_scores(
    split_result: SplitResult,
    scorer: Scorer,
    protocol: EvalProtocol,
    config: Optional[dict] = None,
    block_users: int = 1024,
) -> MetricsReport:
    """
    Rank every evaluated user's candidates with ``scorer`` and compute metrics

    Args:
        split_result: Output of ``split``
        scorer: Maps an array of training-store user indices to a
            (users x items) score block
        protocol: Cutoffs, relevance mode and seed
        config: Settings echoed into the report
        block_users: Users scored per call
    """
    train: InteractionStore = split_result.train
    users = np.array(
        sorted(train.user_index[u] for u in split_result.held_out), dtype=np.int64
    )
    k_max = max(protocol.k_list)
    rankings: Dict[str, Tuple[str, ...]] = {}
    relevant: Dict[str, Dict[str, float]] = {}
    for start in range(0, len(users), block_users):
        chunk = users[start:start + block_users]
        block = scorer(chunk)
        for row, user in enumerate(chunk):
            user_id = train.user_ids[user]
            ranked = rank_candidates(block[row], candidate_items(split_result, int(user)))[:k_max]
            rankings[user_id] = tuple(train.item_ids[i] for i in ranked)
            held = split_result.held_out[user_id]
            relevant[user_id] = {held: split_result.held_out_ratings[user_id]}
    return compute_metrics(
        rankings,
        relevant,
        protocol.k_list,
        graded=protocol.graded_relevance,
        config=config,
        protocol=protocol.model_dump(mode="json"),
        seed=protocol.seed,
    )
