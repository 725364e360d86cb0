"""
User-based recommendation: peer similarity, neighborhoods, score aggregation and top-K
"""

import logging
from pathlib import Path
from typing import Dict, Iterable, List, Mapping, Optional, Sequence, Tuple, Union

import numpy as np
import scipy.sparse as sp
from scipy.spatial.distance import cdist

from ..exceptions import ConfigurationError, InputError, UndefinedSimilarityError
from ..models.config import JaccardBasis, Metric, SimilarityConfig
from ..models.graph import FeatureMatrix, InteractionStore, SocialGraph, id_sort_key
from ..models.reports import Recommendations, ScoreTable

logger = logging.getLogger(__name__)

# entries of one dense similarity or score block
BLOCK_CELLS = 1 << 22


def _metric(cfg: Union[SimilarityConfig, Metric, str]) -> Metric:
    return cfg.metric if isinstance(cfg, SimilarityConfig) else Metric(cfg)


def similarity(x, y, cfg: Union[SimilarityConfig, Metric, str] = Metric.COSINE) -> float:
    """
    Similarity of two feature vectors or two item sets

    euclidean maps the distance d to 1 / (1 + d); jaccard takes sets (vectors
    are read as the set of their nonzero positions); cosine takes vectors.

    Raises:
        UndefinedSimilarityError: cosine with a zero vector, jaccard of two empty sets
        ConfigurationError: Vectors of different dimension
    """
    metric = _metric(cfg)
    if metric == Metric.JACCARD:
        a, b = _as_set(x), _as_set(y)
        union = len(a | b)
        if union == 0:
            raise UndefinedSimilarityError("jaccard similarity of two empty sets")
        return len(a & b) / union
    x = np.asarray(x, dtype=np.float64).ravel()
    y = np.asarray(y, dtype=np.float64).ravel()
    if x.shape != y.shape:
        raise ConfigurationError(f"vectors of dimension {x.size} and {y.size} cannot be compared")
    if metric == Metric.EUCLIDEAN:
        return 1.0 / (1.0 + float(np.sqrt(np.sum((x - y) ** 2))))
    nx, ny = np.linalg.norm(x), np.linalg.norm(y)
    if nx == 0 or ny == 0:
        raise UndefinedSimilarityError("cosine similarity with a zero vector")
    return float(np.clip(np.dot(x, y) / (nx * ny), -1.0, 1.0))


def _as_set(value) -> frozenset:
    if isinstance(value, (set, frozenset)):
        return frozenset(value)
    array = np.asarray(value)
    if array.dtype.kind in "fiub" and array.ndim == 1:
        return frozenset(np.flatnonzero(array).tolist())
    return frozenset(value)


class SimilarityIndex:
    """
    All-pairs user similarity computed block by block

    Operands are feature rows, or the users' rated-item sets for jaccard with
    the item-set basis. Undefined similarities and a user's similarity with
    itself are NaN.
    """

    def __init__(
        self,
        cfg: SimilarityConfig,
        store: Optional[InteractionStore] = None,
        features: Optional[FeatureMatrix] = None,
    ):
        self.cfg = cfg
        self.metric = cfg.metric
        if self.metric == Metric.JACCARD and cfg.jaccard_basis == JaccardBasis.ITEM_SETS:
            if store is None:
                raise ConfigurationError("jaccard over item sets needs the interaction store")
            self.node_ids = store.user_ids
            self._sets = store.matrix(binary=True).tocsr()
        else:
            if features is None:
                raise ConfigurationError(f"{self.metric.value} similarity needs node features")
            self.node_ids = features.node_ids
            values = features.values
            if self.metric == Metric.JACCARD:
                self._sets = sp.csr_matrix((values != 0).astype(np.float64))
            elif self.metric == Metric.COSINE:
                norms = np.linalg.norm(values, axis=1)
                self._valid = norms > 0
                self._unit = values / np.where(self._valid, norms, 1.0)[:, None]
                if not self._valid.all():
                    logger.warning(f"{int((~self._valid).sum())} users have zero feature vectors")
            else:
                self._values = values
        if self.metric == Metric.JACCARD:
            self._sizes = np.asarray(self._sets.sum(axis=1)).ravel()
        self.n = len(self.node_ids)

    def block(self, rows: np.ndarray) -> np.ndarray:
        """Similarities of the given users (rows) to every user (columns)"""
        rows = np.asarray(rows, dtype=np.int64)
        if self.metric == Metric.COSINE:
            sims = np.clip(self._unit[rows] @ self._unit.T, -1.0, 1.0)
            sims[~self._valid[rows]] = np.nan
            sims[:, ~self._valid] = np.nan
        elif self.metric == Metric.EUCLIDEAN:
            sims = 1.0 / (1.0 + cdist(self._values[rows], self._values, metric="euclidean"))
        else:
            inter = (self._sets[rows] @ self._sets.T).toarray()
            union = self._sizes[rows][:, None] + self._sizes[None, :] - inter
            with np.errstate(invalid="ignore", divide="ignore"):
                sims = inter / union
            sims[union == 0] = np.nan
        sims[np.arange(len(rows)), rows] = np.nan
        return sims

    def top_neighbors(self, rows: np.ndarray, m: int) -> List[Tuple[np.ndarray, np.ndarray]]:
        """Top-``m`` peers per row, ties by ascending user index"""
        result = []
        for sims in self.block(rows):
            candidates = np.flatnonzero(np.isfinite(sims))
            order = np.lexsort((candidates, -sims[candidates]))[:m]
            result.append((candidates[order], sims[candidates[order]]))
        return result

    def row_chunks(self, rows: np.ndarray) -> Iterable[np.ndarray]:
        size = max(1, BLOCK_CELLS // max(self.n, 1))
        for start in range(0, len(rows), size):
            yield rows[start:start + size]


def similarity_matrix(
    cfg: SimilarityConfig,
    store: Optional[InteractionStore] = None,
    features: Optional[FeatureMatrix] = None,
) -> Tuple[List[str], np.ndarray]:
    """Dense all-pairs similarity; NaN on the diagonal and where undefined"""
    index = SimilarityIndex(cfg, store=store, features=features)
    rows = np.arange(index.n)
    if index.n == 0:
        return [], np.zeros((0, 0))
    return list(index.node_ids), np.vstack([index.block(chunk) for chunk in index.row_chunks(rows)])


def neighbors(
    u: str,
    features: Optional[FeatureMatrix],
    store: InteractionStore,
    cfg: SimilarityConfig,
) -> List[Tuple[str, float]]:
    """
    The ``cfg.neighbors`` users most similar to ``u``

    Returns:
        (user, similarity) pairs, most similar first; empty with a warning
        when no peer has a defined similarity

    Raises:
        InputError: u is unknown to the similarity operands
    """
    index = SimilarityIndex(cfg, store=store, features=features)
    position = {v: k for k, v in enumerate(index.node_ids)}.get(u)
    if position is None:
        raise InputError(f"user {u} has no similarity operand")
    peers, sims = index.top_neighbors(np.array([position]), cfg.neighbors)[0]
    if len(peers) == 0:
        logger.warning(f"User {u} has no peer with a defined similarity")
    return [(index.node_ids[k], float(s)) for k, s in zip(peers, sims)]


def score(
    u: str,
    neighbor_list: Sequence[Tuple[str, float]],
    store: InteractionStore,
    rating_floor: float = 1.0,
) -> ScoreTable:
    """
    Aggregate neighbor ratings into item scores

    score(u, i) = sum over neighbors v of sim(u, v) * R(v, i), where ratings
    below ``rating_floor`` count as 0. Items u already rated are not
    candidates. Every item some neighbor rated gets an entry.
    """
    own = set(store.lookup(u)) if u in store.user_index else set()
    scores: Dict[str, float] = {}
    for v, weight in neighbor_list:
        if v == u or v not in store.user_index:
            continue
        for item, rating in store.lookup(v).items():
            if item in own:
                continue
            contribution = weight * rating if rating >= rating_floor else 0.0
            scores[item] = scores.get(item, 0.0) + contribution
    ordered = dict(sorted(scores.items(), key=lambda kv: id_sort_key(kv[0])))
    return ScoreTable(user=u, neighbors=[(v, float(w)) for v, w in neighbor_list if v != u], scores=ordered)


def top_k(scores: Union[ScoreTable, Mapping[str, float]], k: int) -> List[str]:
    """
    The ``k`` highest-scoring items, best first, ties by ascending item index

    Raises:
        ConfigurationError: k < 1
    """
    if k < 1:
        raise ConfigurationError(f"K must be at least 1, got {k}")
    table = scores.scores if isinstance(scores, ScoreTable) else scores
    ranked = sorted(table.items(), key=lambda kv: (-kv[1], id_sort_key(kv[0])))
    return [item for item, _ in ranked[:k]]


def popularity_scores(store: InteractionStore) -> np.ndarray:
    """Interaction count per item"""
    return np.bincount(store.items, minlength=store.n_items).astype(np.float64)


def _floored(store: InteractionStore, rating_floor: float) -> sp.csr_matrix:
    matrix = store.matrix().copy()
    matrix.data[matrix.data < rating_floor] = 0.0
    matrix.eliminate_zeros()
    return matrix


class UserScorer:
    """
    Dense item scores for blocks of users

    Users absent from the similarity operands, or without any valid peer,
    fall back to their social out-neighbors (edge weight as similarity) and
    then to item popularity. ``fallback`` records which route each such user
    took.
    """

    def __init__(
        self,
        store: InteractionStore,
        cfg: SimilarityConfig,
        features: Optional[FeatureMatrix] = None,
        social: Optional[SocialGraph] = None,
    ):
        self.store = store
        self.cfg = cfg
        self.index = SimilarityIndex(cfg, store=store, features=features)
        self._ratings = _floored(store, cfg.rating_floor)
        self._popularity = popularity_scores(store)
        operand_index = {v: k for k, v in enumerate(self.index.node_ids)}
        self._operand_of_user = np.array(
            [operand_index.get(u, -1) for u in store.user_ids], dtype=np.int64
        )
        self._user_of_operand = np.array(
            [store.user_index.get(v, -1) for v in self.index.node_ids], dtype=np.int64
        )
        self._social = None
        if social is not None and cfg.social_fallback:
            self._social = social.to_simple_graph(store.user_ids, directed=True).adjacency
        self.fallback: Dict[str, str] = {}

    def _social_row(self, user: int) -> Tuple[np.ndarray, np.ndarray]:
        if self._social is None:
            return np.zeros(0, dtype=np.int64), np.zeros(0)
        start, end = self._social.indptr[user], self._social.indptr[user + 1]
        peers = self._social.indices[start:end]
        weights = self._social.data[start:end]
        order = np.lexsort((peers, -weights))[: self.cfg.neighbors]
        return peers[order], weights[order]

    def scores(self, users: np.ndarray) -> np.ndarray:
        """Scores of every item for the given store user indices"""
        users = np.asarray(users, dtype=np.int64)
        n_users = self.store.n_users
        rows, cols, vals = [], [], []
        needs_fallback = []
        operands = self._operand_of_user[users]
        present = np.flatnonzero(operands >= 0)
        lists = self.index.top_neighbors(operands[present], self.cfg.neighbors) if len(present) else []
        for position, (peers, sims) in zip(present, lists):
            mapped = self._user_of_operand[peers]
            known = mapped >= 0
            if not known.any():
                needs_fallback.append(position)
                continue
            rows.extend([position] * int(known.sum()))
            cols.extend(mapped[known].tolist())
            vals.extend(sims[known].tolist())
        needs_fallback.extend(np.flatnonzero(operands < 0).tolist())

        popular = []
        for position in sorted(needs_fallback):
            user = int(users[position])
            peers, weights = self._social_row(user)
            if len(peers):
                self.fallback[self.store.user_ids[user]] = "social"
                rows.extend([position] * len(peers))
                cols.extend(peers.tolist())
                vals.extend(weights.tolist())
            else:
                self.fallback[self.store.user_ids[user]] = "popularity"
                popular.append(position)

        weights = sp.csr_matrix((vals, (rows, cols)), shape=(len(users), n_users))
        block = (weights @ self._ratings).toarray()
        if popular:
            block[popular] = self._popularity
        return block

    def blocks(self, users: np.ndarray) -> Iterable[Tuple[np.ndarray, np.ndarray]]:
        """(user indices, score block) pairs covering ``users`` in order"""
        size = max(1, BLOCK_CELLS // max(self.store.n_items, self.index.n, 1))
        for start in range(0, len(users), size):
            chunk = users[start:start + size]
            yield chunk, self.scores(chunk)


def recommend_all(
    features: Optional[FeatureMatrix],
    store: InteractionStore,
    cfg: SimilarityConfig,
    k: int,
    social: Optional[SocialGraph] = None,
    users: Optional[Sequence[str]] = None,
) -> Recommendations:
    """
    Top-K unseen items for every user

    Args:
        features: User feature rows (unused for jaccard over item sets)
        store: Training interactions; their items are never recommended back
        cfg: Similarity settings
        k: List length
        social: Optional social graph for cold-start fallback
        users: Restrict to these users (store order otherwise)
    """
    if k < 1:
        raise ConfigurationError(f"K must be at least 1, got {k}")
    scorer = UserScorer(store, cfg, features=features, social=social)
    if users is None:
        targets = np.arange(store.n_users)
    else:
        missing = [u for u in users if u not in store.user_index]
        if missing:
            raise InputError(f"unknown user {missing[0]}")
        targets = np.array([store.user_index[u] for u in users], dtype=np.int64)
    rated = store.matrix(binary=True)
    lists: Dict[str, List[Tuple[str, float]]] = {}
    for chunk, block in scorer.blocks(targets):
        for row, user in enumerate(chunk):
            values = block[row]
            seen = rated.indices[rated.indptr[user]:rated.indptr[user + 1]]
            candidates = np.setdiff1d(np.arange(store.n_items), seen, assume_unique=True)
            order = candidates[np.argsort(-values[candidates], kind="stable")][:k]
            lists[store.user_ids[user]] = [(store.item_ids[i], float(values[i])) for i in order]
    social_users = sorted((u for u, route in scorer.fallback.items() if route == "social"), key=id_sort_key)
    popular_users = sorted((u for u, route in scorer.fallback.items() if route == "popularity"), key=id_sort_key)
    if scorer.fallback:
        logger.info(
            f"Cold-start fallback: {len(social_users)} users via social links, "
            f"{len(popular_users)} via popularity"
        )
    return Recommendations(
        k=k,
        lists=lists,
        social_fallback=social_users,
        popularity_fallback=popular_users,
    )


def write_recommendations(recs: Recommendations, path: Union[str, Path]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    lines = recs.lines()
    path.write_text("\n".join(lines) + ("\n" if lines else ""), encoding="utf-8")
    return path
