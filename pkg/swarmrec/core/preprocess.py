"""
Cleaning layer: rating threshold, anomaly scores, trust scores, isolated nodes
"""

import logging
from typing import Dict, Optional, Tuple

import numpy as np
import scipy.sparse as sp

from ..exceptions import EmptyInputError, InputError, RangeError
from ..models.config import RunConfig
from ..models.graph import RATING_MAX, RATING_MIN, Hypergraph, InteractionStore
from ..models.reports import CleanReport, TrustTable

logger = logging.getLogger(__name__)


def remove_isolated(h: Hypergraph) -> Tuple[Hypergraph, CleanReport]:
    """
    Drop nodes that belong to no hyperedge

    Returns:
        The restricted hypergraph (same hyperedges, renumbered members) and a
        report counting the removed nodes
    """
    keep = h.membership_degree() > 0
    removed = [v for v, k in zip(h.node_ids, keep) if not k]
    if removed:
        logger.info(f"Removed {len(removed)} isolated nodes of {h.n_nodes}")
    report = CleanReport(removed_isolated=len(removed), removed_isolated_ids=removed)
    if not removed:
        return h, report
    return h.restrict(keep), report


def threshold_filter(store: InteractionStore, t: float) -> InteractionStore:
    """
    Keep entries with rating >= t

    Users and items left without entries leave the store.

    Raises:
        RangeError: t outside [0, 5]
    """
    if not RATING_MIN <= t <= RATING_MAX:
        raise RangeError(f"rating threshold must lie in [0, 5], got {t}")
    keep = store.ratings >= t
    if keep.all():
        return store
    return store.select(keep)


def anomaly_scores(store: InteractionStore) -> Dict[str, float]:
    """
    Activity-weighted rating variance per user

    psi_u = (n_u / max_v n_v) * Var(nonzero ratings of u), with n_u the number
    of nonzero ratings and population variance. Users with at most one nonzero
    rating score 0.

    Raises:
        EmptyInputError: Store without entries
    """
    if store.n_entries == 0:
        raise EmptyInputError("anomaly scores need at least one rating")
    nonzero = store.ratings != 0
    users = store.users[nonzero]
    ratings = store.ratings[nonzero]
    counts = np.bincount(users, minlength=store.n_users).astype(np.float64)
    most = counts.max()
    if most == 0:
        return {u: 0.0 for u in store.user_ids}
    sums = np.bincount(users, weights=ratings, minlength=store.n_users)
    means = np.divide(sums, counts, out=np.zeros_like(sums), where=counts > 0)
    squares = np.bincount(users, weights=(ratings - means[users]) ** 2, minlength=store.n_users)
    variance = np.divide(squares, counts, out=np.zeros_like(squares), where=counts > 1)
    scores = (counts / most) * variance
    return {u: float(s) for u, s in zip(store.user_ids, scores)}


def flag_anomalies(scores: Dict[str, float], phi: float) -> Dict[str, float]:
    """Users whose score exceeds the cutoff"""
    return {u: s for u, s in scores.items() if s > phi}


def exclude_anomalies(store: InteractionStore, scores: Dict[str, float], phi: float) -> InteractionStore:
    """
    Remove every entry of users scoring above ``phi``

    Raises:
        InputError: A user of the store has no score
    """
    missing = [u for u in store.user_ids if u not in scores]
    if missing:
        raise InputError(f"no anomaly score for {len(missing)} users, e.g. {missing[0]}")
    flagged = np.array([scores[u] > phi for u in store.user_ids], dtype=bool)
    if not flagged.any():
        return store
    logger.info(f"Excluding {int(flagged.sum())} users with anomaly score above {phi}")
    return store.select(~flagged[store.users])


def degree_filter(
    store: InteractionStore,
    min_user_interactions: int = 1,
    min_item_interactions: int = 1,
) -> InteractionStore:
    """
    Keep entries whose user and item both have enough interactions

    Degrees are counted once on the input (a single pass, not a k-core).
    """
    user_degree = np.bincount(store.users, minlength=store.n_users)
    item_degree = np.bincount(store.items, minlength=store.n_items)
    keep = (user_degree[store.users] >= min_user_interactions) & (
        item_degree[store.items] >= min_item_interactions
    )
    if keep.all():
        return store
    return store.select(keep)


def trust_scores(store: InteractionStore, window: Optional[float] = None) -> TrustTable:
    """
    Pairwise trust from rating consistency

    tau_uv = exp(-Var(r_ui - r_vi)) over items both users rated (nonzero
    ratings, population variance). Pairs without co-rated items are absent.
    With a window only co-ratings whose timestamps differ by at most
    ``window`` count.

    Raises:
        InputError: A window is given for a store without timestamps
    """
    if window is not None:
        if not store.has_timestamps:
            raise InputError("a trust window needs timestamped ratings")
        rows, cols, counts, sums, squares = _windowed_moments(store, window)
    else:
        rows, cols, counts, sums, squares = _pair_moments(store)

    mean = sums / counts
    variance = np.maximum(squares / counts - mean ** 2, 0.0)
    tau = np.exp(-variance)
    n = store.n_users
    upper = sp.coo_matrix((tau, (rows, cols)), shape=(n, n))
    matrix = (upper + upper.T).tocsr()
    table = TrustTable(node_ids=store.user_ids, matrix=matrix)
    logger.info(f"Computed trust for {table.n_pairs} user pairs")
    return table


def _pair_moments(store: InteractionStore):
    """Co-rating count, difference sum and squared-difference sum per user pair (i < j)"""
    nonzero = store.ratings != 0
    shape = (store.n_users, store.n_items)
    users, items, ratings = store.users[nonzero], store.items[nonzero], store.ratings[nonzero]
    binary = sp.csr_matrix((np.ones(len(users)), (users, items)), shape=shape)
    values = sp.csr_matrix((ratings, (users, items)), shape=shape)
    squared = sp.csr_matrix((ratings ** 2, (users, items)), shape=shape)

    co_counts = sp.triu(binary @ binary.T, k=1).tocoo()
    rows, cols = co_counts.row, co_counts.col
    if len(rows) == 0:
        return rows, cols, co_counts.data, np.array([]), np.array([])
    first = (values @ binary.T - binary @ values.T).tocsr()
    second = (squared @ binary.T + binary @ squared.T - 2 * (values @ values.T)).tocsr()
    sums = np.asarray(first[rows, cols]).ravel()
    squares = np.asarray(second[rows, cols]).ravel()
    return rows, cols, co_counts.data, sums, squares


def _windowed_moments(store: InteractionStore, window: float):
    """Per-item accumulation of pair moments for co-ratings within the window"""
    nonzero = store.ratings != 0
    users = store.users[nonzero]
    items = store.items[nonzero]
    ratings = store.ratings[nonzero]
    stamps = store.timestamps[nonzero]
    order = np.lexsort((users, items))
    users, items, ratings, stamps = users[order], items[order], ratings[order], stamps[order]
    boundaries = np.flatnonzero(np.diff(items)) + 1
    keys, diffs = [], []
    for span in np.split(np.arange(len(items)), boundaries):
        if len(span) < 2:
            continue
        u, r, s = users[span], ratings[span], stamps[span]
        left, right = np.triu_indices(len(span), k=1)
        close = np.abs(s[left] - s[right]) <= window
        keys.append(u[left[close]] * store.n_users + u[right[close]])
        diffs.append(r[left[close]] - r[right[close]])
    if not keys:
        empty = np.array([], dtype=np.int64)
        return empty, empty, np.array([]), np.array([]), np.array([])
    keys = np.concatenate(keys)
    diffs = np.concatenate(diffs)
    unique, inverse = np.unique(keys, return_inverse=True)
    counts = np.bincount(inverse).astype(np.float64)
    sums = np.bincount(inverse, weights=diffs)
    squares = np.bincount(inverse, weights=diffs ** 2)
    return unique // store.n_users, unique % store.n_users, counts, sums, squares


def clean(store: InteractionStore, cfg: RunConfig) -> Tuple[InteractionStore, CleanReport, TrustTable]:
    """
    Default cleaning order: threshold, anomaly exclusion, degree filter, trust

    Duplicates were already resolved at load time and are only counted here.
    """
    input_entries = store.n_entries
    filtered = threshold_filter(store, cfg.threshold)
    below = input_entries - filtered.n_entries

    flagged: Dict[str, float] = {}
    anomalous = 0
    if cfg.exclude_anomalies and filtered.n_entries:
        scores = anomaly_scores(filtered)
        flagged = flag_anomalies(scores, cfg.phi)
        before = filtered.n_entries
        filtered = exclude_anomalies(filtered, scores, cfg.phi)
        anomalous = before - filtered.n_entries

    before = filtered.n_entries
    filtered = degree_filter(filtered, cfg.min_user_interactions, cfg.min_item_interactions)
    by_degree = before - filtered.n_entries
    if filtered.n_entries == 0:
        raise EmptyInputError("no interactions left after cleaning")

    trust = trust_scores(filtered, window=cfg.trust_window)
    report = CleanReport(
        input_entries=input_entries,
        kept_entries=filtered.n_entries,
        removed_duplicates=store.duplicates_resolved,
        removed_below_threshold=below,
        removed_anomalous_entries=anomalous,
        removed_by_degree=by_degree,
        flagged_anomalies={u: round(s, 12) for u, s in sorted(flagged.items())},
    )
    logger.info(
        f"Cleaning kept {report.kept_entries} of {input_entries} entries "
        f"({below} below threshold, {anomalous} anomalous, {by_degree} low degree)"
    )
    return filtered, report, trust
