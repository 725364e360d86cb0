"""
Graph data models: ratings, social edges, hypergraphs, simple graphs and feature rows
"""

import math
from enum import Enum
from functools import cached_property
from typing import Any, Dict, Iterable, Iterator, List, Optional, Sequence, Tuple

import numpy as np
import scipy.sparse as sp
from pydantic import field_validator, model_validator

from .base import BaseModel

RATING_MIN = 0.0
RATING_MAX = 5.0


def id_sort_key(node_id: str) -> Tuple[int, Any]:
    """Sort key placing numeric ids in numeric order ahead of other strings"""
    if node_id.isdigit():
        return (0, int(node_id), node_id)
    return (1, node_id, node_id)


def canonical_ids(ids: Iterable[str]) -> Tuple[str, ...]:
    """Deduplicate and order ids deterministically"""
    return tuple(sorted(set(ids), key=id_sort_key))


def _frozen_array(values: Any, dtype: Any) -> np.ndarray:
    array = np.array(values, dtype=dtype, copy=True)
    array.setflags(write=False)
    return array


class DedupRule(str, Enum):
    """How duplicate (user, item) ratings are collapsed"""
    KEEP_LAST = "keep-last"
    KEEP_MAX = "keep-max"


class InteractionStore(BaseModel):
    """Sparse user x item rating matrix R with optional timestamps

    Entries are held as parallel arrays of dense user/item indices sorted by
    (user, item). ``user_ids``/``item_ids`` map indices back to the opaque
    string ids of the input files.
    """

    user_ids: Tuple[str, ...]
    item_ids: Tuple[str, ...]
    users: np.ndarray
    items: np.ndarray
    ratings: np.ndarray
    timestamps: Optional[np.ndarray] = None
    duplicates_resolved: int = 0

    @field_validator("users", "items", mode="before")
    @classmethod
    def _as_index_array(cls, value: Any) -> np.ndarray:
        return _frozen_array(value, np.int64)

    @field_validator("ratings", mode="before")
    @classmethod
    def _as_rating_array(cls, value: Any) -> np.ndarray:
        return _frozen_array(value, np.float64)

    @field_validator("timestamps", mode="before")
    @classmethod
    def _as_timestamp_array(cls, value: Any) -> Optional[np.ndarray]:
        if value is None:
            return None
        return _frozen_array(value, np.float64)

    @model_validator(mode="after")
    def _check_entries(self) -> "InteractionStore":
        n = len(self.ratings)
        if len(self.users) != n or len(self.items) != n:
            raise ValueError("users, items and ratings must have equal length")
        if self.timestamps is not None and len(self.timestamps) != n:
            raise ValueError("timestamps must have one value per entry")
        if n:
            if self.users.min() < 0 or self.users.max() >= len(self.user_ids):
                raise ValueError("entry references an unknown user")
            if self.items.min() < 0 or self.items.max() >= len(self.item_ids):
                raise ValueError("entry references an unknown item")
            if not np.all(np.isfinite(self.ratings)):
                raise ValueError("ratings must be finite")
            if self.ratings.min() < RATING_MIN or self.ratings.max() > RATING_MAX:
                raise ValueError("ratings must lie within [0, 5]")
            keys = self.users * max(len(self.item_ids), 1) + self.items
            if len(np.unique(keys)) != n:
                raise ValueError("at most one entry per (user, item) pair is allowed")
        return self

    @classmethod
    def from_records(
        cls,
        records: Iterable[Tuple[str, str, float, Optional[float]]],
        dedup_rule: DedupRule = DedupRule.KEEP_MAX,
        user_ids: Optional[Sequence[str]] = None,
        item_ids: Optional[Sequence[str]] = None,
    ) -> "InteractionStore":
        """
        Build a store from (user, item, rating, timestamp) records

        Args:
            records: Records in input order; timestamp may be None
            dedup_rule: Rule applied to repeated (user, item) pairs
            user_ids: Optional explicit user universe (must cover the records)
            item_ids: Optional explicit item universe (must cover the records)

        Returns:
            Validated store with canonical entry order
        """
        dedup_rule = DedupRule(dedup_rule)
        chosen: Dict[Tuple[str, str], Tuple[float, Optional[float]]] = {}
        duplicates = 0
        any_timestamp = False
        all_timestamp = True
        for user, item, rating, timestamp in records:
            if timestamp is None:
                all_timestamp = False
            else:
                any_timestamp = True
            key = (user, item)
            if key in chosen:
                duplicates += 1
                if dedup_rule == DedupRule.KEEP_MAX:
                    previous = chosen[key]
                    if (rating, _ts_key(timestamp)) <= (previous[0], _ts_key(previous[1])):
                        continue
            chosen[key] = (float(rating), timestamp)

        users_universe = canonical_ids(user_ids if user_ids is not None else (u for u, _ in chosen))
        items_universe = canonical_ids(item_ids if item_ids is not None else (i for _, i in chosen))
        user_index = {u: k for k, u in enumerate(users_universe)}
        item_index = {i: k for k, i in enumerate(items_universe)}

        rows = sorted(
            ((user_index[u], item_index[i], r, ts) for (u, i), (r, ts) in chosen.items()),
            key=lambda row: (row[0], row[1]),
        )
        keep_timestamps = any_timestamp and all_timestamp
        return cls(
            user_ids=users_universe,
            item_ids=items_universe,
            users=[row[0] for row in rows],
            items=[row[1] for row in rows],
            ratings=[row[2] for row in rows],
            timestamps=[row[3] for row in rows] if keep_timestamps else None,
            duplicates_resolved=duplicates,
        )

    @property
    def n_users(self) -> int:
        return len(self.user_ids)

    @property
    def n_items(self) -> int:
        return len(self.item_ids)

    @property
    def n_entries(self) -> int:
        return len(self.ratings)

    @property
    def has_timestamps(self) -> bool:
        return self.timestamps is not None

    @cached_property
    def user_index(self) -> Dict[str, int]:
        return {u: k for k, u in enumerate(self.user_ids)}

    @cached_property
    def item_index(self) -> Dict[str, int]:
        return {i: k for k, i in enumerate(self.item_ids)}

    @cached_property
    def _user_offsets(self) -> np.ndarray:
        return np.searchsorted(self.users, np.arange(self.n_users + 1))

    def matrix(self, binary: bool = False, nonzero_only: bool = False) -> sp.csr_matrix:
        """
        Rating matrix R as CSR (users x items)

        Args:
            binary: Store 1.0 instead of the rating
            nonzero_only: Keep only entries whose rating is not 0
        """
        mask = self.ratings != 0 if nonzero_only else np.ones(self.n_entries, dtype=bool)
        data = np.ones(int(mask.sum())) if binary else self.ratings[mask]
        matrix = sp.csr_matrix(
            (data, (self.users[mask], self.items[mask])),
            shape=(self.n_users, self.n_items),
        )
        matrix.sort_indices()
        return matrix

    def entry_slice(self, user: int) -> slice:
        """Positions of a user's entries in the entry arrays"""
        return slice(int(self._user_offsets[user]), int(self._user_offsets[user + 1]))

    def rated_items(self, user: int) -> np.ndarray:
        """Item indices rated by a user index"""
        return self.items[self.entry_slice(user)]

    def lookup(self, user_id: str) -> Dict[str, float]:
        """Per-user item -> rating map"""
        span = self.entry_slice(self.user_index[user_id])
        return {
            self.item_ids[item]: float(rating)
            for item, rating in zip(self.items[span], self.ratings[span])
        }

    def interaction_counts(self) -> np.ndarray:
        """Entries per user"""
        return np.diff(self._user_offsets)

    def records(self) -> Iterator[Tuple[str, str, float, Optional[float]]]:
        """Entries as (user id, item id, rating, timestamp)"""
        for position in range(self.n_entries):
            timestamp = None if self.timestamps is None else float(self.timestamps[position])
            yield (
                self.user_ids[self.users[position]],
                self.item_ids[self.items[position]],
                float(self.ratings[position]),
                timestamp,
            )

    def select(self, mask: np.ndarray, compact: bool = True) -> "InteractionStore":
        """
        Subset of entries

        Args:
            mask: Boolean mask over entries
            compact: Drop users and items left without entries

        Returns:
            New store; index spaces are renumbered when compacting
        """
        mask = np.asarray(mask, dtype=bool)
        users = self.users[mask]
        items = self.items[mask]
        user_ids = self.user_ids
        item_ids = self.item_ids
        if compact:
            kept_users = np.unique(users)
            kept_items = np.unique(items)
            user_ids = tuple(self.user_ids[k] for k in kept_users)
            item_ids = tuple(self.item_ids[k] for k in kept_items)
            users = np.searchsorted(kept_users, users)
            items = np.searchsorted(kept_items, items)
        return InteractionStore(
            user_ids=user_ids,
            item_ids=item_ids,
            users=users,
            items=items,
            ratings=self.ratings[mask],
            timestamps=None if self.timestamps is None else self.timestamps[mask],
            duplicates_resolved=self.duplicates_resolved,
        )

    def same_entries(self, other: "InteractionStore") -> bool:
        """Entry-level equality including id universes"""
        if self.user_ids != other.user_ids or self.item_ids != other.item_ids:
            return False
        if self.has_timestamps != other.has_timestamps:
            return False
        same = (
            np.array_equal(self.users, other.users)
            and np.array_equal(self.items, other.items)
            and np.array_equal(self.ratings, other.ratings)
        )
        if same and self.timestamps is not None:
            same = np.array_equal(self.timestamps, other.timestamps)
        return bool(same)


def _ts_key(timestamp: Optional[float]) -> float:
    return -math.inf if timestamp is None else float(timestamp)


class SocialGraph(BaseModel):
    """Weighted user-user edges (trust statements, social links)"""

    node_ids: Tuple[str, ...]
    sources: np.ndarray
    targets: np.ndarray
    weights: np.ndarray
    dropped_self_loops: int = 0

    @field_validator("sources", "targets", mode="before")
    @classmethod
    def _as_index_array(cls, value: Any) -> np.ndarray:
        return _frozen_array(value, np.int64)

    @field_validator("weights", mode="before")
    @classmethod
    def _as_weight_array(cls, value: Any) -> np.ndarray:
        return _frozen_array(value, np.float64)

    @model_validator(mode="after")
    def _check_edges(self) -> "SocialGraph":
        m = len(self.weights)
        if len(self.sources) != m or len(self.targets) != m:
            raise ValueError("sources, targets and weights must have equal length")
        if m:
            n = len(self.node_ids)
            for side in (self.sources, self.targets):
                if side.min() < 0 or side.max() >= n:
                    raise ValueError("edge references an unknown node")
            if np.any(self.sources == self.targets):
                raise ValueError("self-loop edges are not allowed")
            if not np.all(np.isfinite(self.weights)):
                raise ValueError("edge weights must be finite")
            if self.weights.min() < 0.0 or self.weights.max() > 1.0:
                raise ValueError("edge weights must lie within [0, 1]")
        return self

    @property
    def n_nodes(self) -> int:
        return len(self.node_ids)

    @property
    def n_edges(self) -> int:
        return len(self.weights)

    @cached_property
    def node_index(self) -> Dict[str, int]:
        return {v: k for k, v in enumerate(self.node_ids)}

    def edges(self) -> Iterator[Tuple[str, str, float]]:
        for s, t, w in zip(self.sources, self.targets, self.weights):
            yield self.node_ids[s], self.node_ids[t], float(w)

    def to_simple_graph(
        self,
        node_ids: Optional[Sequence[str]] = None,
        directed: bool = False,
    ) -> "SimpleGraph":
        """
        Simple graph over a node universe

        Edges touching nodes outside ``node_ids`` are dropped. Undirected
        conversion keeps the larger weight of reciprocal edges.
        """
        universe = tuple(node_ids) if node_ids is not None else self.node_ids
        index = {v: k for k, v in enumerate(universe)}
        rows: List[int] = []
        cols: List[int] = []
        vals: List[float] = []
        for s, t, w in self.edges():
            if s in index and t in index:
                rows.append(index[s])
                cols.append(index[t])
                vals.append(w)
        return SimpleGraph.from_edges(universe, zip(rows, cols, vals), directed=directed)


class HyperedgeKind(str, Enum):
    """Hyperedge semantics"""
    CO_INTERACTION = "co-interaction"
    CO_PREFERENCE = "co-preference"


class Hyperedge(BaseModel):
    """A set of at least two node indices with its construction semantics"""

    members: Tuple[int, ...]
    kind: HyperedgeKind
    anchor: Optional[str] = None
    window: Optional[Tuple[float, float]] = None

    @field_validator("members", mode="before")
    @classmethod
    def _sorted_members(cls, value: Any) -> Tuple[int, ...]:
        return tuple(sorted({int(v) for v in value}))

    @model_validator(mode="after")
    def _check_semantics(self) -> "Hyperedge":
        if len(self.members) < 2:
            raise ValueError("a hyperedge needs at least two members")
        if self.kind == HyperedgeKind.CO_INTERACTION and self.anchor is None:
            raise ValueError("co-interaction hyperedges carry an anchor item")
        if self.kind == HyperedgeKind.CO_PREFERENCE and self.anchor is not None:
            raise ValueError("co-preference hyperedges carry no anchor")
        return self


class Hypergraph(BaseModel):
    """Node set plus typed hyperedges"""

    node_ids: Tuple[str, ...]
    hyperedges: Tuple[Hyperedge, ...] = ()

    @model_validator(mode="after")
    def _check_members(self) -> "Hypergraph":
        n = len(self.node_ids)
        for edge in self.hyperedges:
            if edge.members[0] < 0 or edge.members[-1] >= n:
                raise ValueError("hyperedge member outside the node set")
        return self

    @property
    def n_nodes(self) -> int:
        return len(self.node_ids)

    @property
    def n_hyperedges(self) -> int:
        return len(self.hyperedges)

    def incidence(self) -> sp.csr_matrix:
        """Binary node x hyperedge incidence matrix"""
        rows = [m for edge in self.hyperedges for m in edge.members]
        cols = [k for k, edge in enumerate(self.hyperedges) for _ in edge.members]
        return sp.csr_matrix(
            (np.ones(len(rows)), (rows, cols)),
            shape=(self.n_nodes, self.n_hyperedges),
        )

    def membership_degree(self) -> np.ndarray:
        """Number of hyperedges each node belongs to"""
        degree = np.zeros(self.n_nodes, dtype=np.int64)
        for edge in self.hyperedges:
            degree[list(edge.members)] += 1
        return degree

    def counts_by_kind(self) -> Dict[str, int]:
        counts = {kind.value: 0 for kind in HyperedgeKind}
        for edge in self.hyperedges:
            counts[edge.kind.value] += 1
        return counts

    def member_ids(self, edge: Hyperedge) -> Tuple[str, ...]:
        return tuple(self.node_ids[m] for m in edge.members)

    def merge(self, other: "Hypergraph") -> "Hypergraph":
        """Union of hyperedges over the same node universe"""
        if other.node_ids != self.node_ids:
            raise ValueError("hypergraphs must share the node universe to be merged")
        return Hypergraph(node_ids=self.node_ids, hyperedges=self.hyperedges + other.hyperedges)

    def restrict(self, keep: np.ndarray) -> "Hypergraph":
        """
        Keep a subset of nodes

        Hyperedges are renumbered onto the kept nodes; those left with fewer
        than two members are dropped.
        """
        keep = np.asarray(keep, dtype=bool)
        new_index = np.cumsum(keep) - 1
        edges = []
        for edge in self.hyperedges:
            members = [int(new_index[m]) for m in edge.members if keep[m]]
            if len(members) >= 2:
                edges.append(edge.model_copy(update={"members": tuple(members)}))
        node_ids = tuple(v for v, k in zip(self.node_ids, keep) if k)
        return Hypergraph(node_ids=node_ids, hyperedges=tuple(edges))


class SimpleGraph(BaseModel):
    """Simple graph with weighted CSR adjacency

    Undirected graphs store both directions; ``adjacency[i, j]`` is the weight
    of the edge i -> j. No self-loops.
    """

    node_ids: Tuple[str, ...]
    adjacency: Any
    directed: bool = False

    @field_validator("adjacency", mode="before")
    @classmethod
    def _as_csr(cls, value: Any) -> sp.csr_matrix:
        matrix = sp.csr_matrix(value, dtype=np.float64, copy=True)
        matrix.sum_duplicates()
        matrix.eliminate_zeros()
        matrix.sort_indices()
        return matrix

    @model_validator(mode="after")
    def _check_adjacency(self) -> "SimpleGraph":
        n = len(self.node_ids)
        if self.adjacency.shape != (n, n):
            raise ValueError("adjacency must be square over the node set")
        if self.adjacency.diagonal().any():
            raise ValueError("self-loops are not allowed")
        data = self.adjacency.data
        if data.size and (not np.all(np.isfinite(data)) or data.min() < 0):
            raise ValueError("edge weights must be finite and nonnegative")
        if not self.directed and (self.adjacency != self.adjacency.T).nnz:
            raise ValueError("undirected adjacency must be symmetric")
        return self

    @classmethod
    def from_edges(
        cls,
        node_ids: Sequence[str],
        edges: Iterable[Tuple[int, int, float]],
        directed: bool = False,
    ) -> "SimpleGraph":
        """
        Build from (source index, target index, weight) triples

        Self-loops are ignored; repeated edges keep the maximum weight.
        """
        n = len(node_ids)
        rows: List[int] = []
        cols: List[int] = []
        vals: List[float] = []
        for s, t, w in edges:
            if s == t:
                continue
            rows.append(int(s))
            cols.append(int(t))
            vals.append(float(w))
            if not directed:
                rows.append(int(t))
                cols.append(int(s))
                vals.append(float(w))
        coo = sp.coo_matrix((vals, (rows, cols)), shape=(n, n))
        # maximum over duplicates instead of the default summation
        order = np.lexsort((-coo.data, coo.col, coo.row))
        r, c, v = coo.row[order], coo.col[order], coo.data[order]
        first = np.ones(len(r), dtype=bool)
        first[1:] = (r[1:] != r[:-1]) | (c[1:] != c[:-1])
        adjacency = sp.csr_matrix((v[first], (r[first], c[first])), shape=(n, n))
        return cls(node_ids=tuple(node_ids), adjacency=adjacency, directed=directed)

    @classmethod
    def from_adjacency(cls, node_ids: Sequence[str], adjacency: Any, directed: bool = False) -> "SimpleGraph":
        matrix = sp.csr_matrix(adjacency, dtype=np.float64, copy=True)
        matrix.setdiag(0)
        return cls(node_ids=tuple(node_ids), adjacency=matrix, directed=directed)

    @property
    def n_nodes(self) -> int:
        return len(self.node_ids)

    @property
    def n_edges(self) -> int:
        """Edge count (undirected edges counted once)"""
        nnz = int(self.adjacency.nnz)
        return nnz if self.directed else nnz // 2

    @cached_property
    def node_index(self) -> Dict[str, int]:
        return {v: k for k, v in enumerate(self.node_ids)}

    def neighbors(self, node: int) -> np.ndarray:
        """Out-neighbors of a node index, ascending"""
        start, end = self.adjacency.indptr[node], self.adjacency.indptr[node + 1]
        return self.adjacency.indices[start:end]

    def degrees(self) -> np.ndarray:
        """Out-degree (neighbor count) per node"""
        return np.diff(self.adjacency.indptr).astype(np.int64)

    def binary(self) -> sp.csr_matrix:
        """Unweighted adjacency"""
        matrix = self.adjacency.copy()
        matrix.data = np.ones_like(matrix.data)
        return matrix

    def edge_list(self) -> List[Tuple[int, int, float]]:
        coo = self.adjacency.tocoo()
        edges = []
        for s, t, w in zip(coo.row, coo.col, coo.data):
            if self.directed or s < t:
                edges.append((int(s), int(t), float(w)))
        return edges

    def union(self, other: "SimpleGraph") -> "SimpleGraph":
        """Union of edge sets over the same node universe (max weight on overlap)"""
        if other.node_ids != self.node_ids:
            raise ValueError("graphs must share the node universe to be united")
        adjacency = self.adjacency.maximum(other.adjacency)
        return SimpleGraph(
            node_ids=self.node_ids,
            adjacency=adjacency,
            directed=self.directed or other.directed,
        )

    def to_undirected(self) -> "SimpleGraph":
        if not self.directed:
            return self
        adjacency = self.adjacency.maximum(self.adjacency.T)
        return SimpleGraph(node_ids=self.node_ids, adjacency=adjacency, directed=False)

    def relabel(self, permutation: Sequence[int]) -> "SimpleGraph":
        """Graph whose node k is this graph's node ``permutation[k]``"""
        perm = np.asarray(permutation)
        adjacency = self.adjacency[perm][:, perm]
        return SimpleGraph(
            node_ids=tuple(self.node_ids[p] for p in perm),
            adjacency=adjacency,
            directed=self.directed,
        )


class FeatureMatrix(BaseModel):
    """Per-node real vectors sharing one dimension"""

    node_ids: Tuple[str, ...]
    values: np.ndarray

    @field_validator("values", mode="before")
    @classmethod
    def _as_matrix(cls, value: Any) -> np.ndarray:
        matrix = np.array(value, dtype=np.float64, copy=True)
        if matrix.ndim == 1:
            matrix = matrix.reshape(-1, 1)
        matrix.setflags(write=False)
        return matrix

    @model_validator(mode="after")
    def _check_rows(self) -> "FeatureMatrix":
        if self.values.ndim != 2:
            raise ValueError("feature values must be a 2-D array")
        if self.values.shape[0] != len(self.node_ids):
            raise ValueError("one feature row per node is required")
        if self.values.shape[1] < 1:
            raise ValueError("feature dimension must be positive")
        if not np.all(np.isfinite(self.values)):
            raise ValueError("feature components must be finite")
        return self

    @property
    def dimension(self) -> int:
        return int(self.values.shape[1])

    @property
    def n_nodes(self) -> int:
        return len(self.node_ids)

    @cached_property
    def node_index(self) -> Dict[str, int]:
        return {v: k for k, v in enumerate(self.node_ids)}

    def row(self, node_id: str) -> np.ndarray:
        return self.values[self.node_index[node_id]]

    def take(self, node_ids: Sequence[str]) -> "FeatureMatrix":
        """Rows reordered (or subset) to the given node ids"""
        rows = [self.node_index[v] for v in node_ids]
        return FeatureMatrix(node_ids=tuple(node_ids), values=self.values[rows])
