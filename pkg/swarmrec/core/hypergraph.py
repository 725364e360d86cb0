"""
Hypergraph construction: co-interaction and co-preference hyperedges, ego networks
"""

import logging
from pathlib import Path
from typing import List, Optional, Union

import numpy as np
import scipy.sparse as sp
from scipy.sparse.csgraph import connected_components

from ..exceptions import ConfigurationError, RangeError
from ..models.graph import (
    FeatureMatrix,
    Hyperedge,
    HyperedgeKind,
    Hypergraph,
    InteractionStore,
    SocialGraph,
)

logger = logging.getLogger(__name__)

# cosine values this close below the threshold still count (identical rows give 1 - 1ulp)
COSINE_SLACK = 1e-12
SIMILARITY_CHUNK = 1024


def build_co_interaction(store: InteractionStore, window: Optional[float] = None) -> Hypergraph:
    """
    One hyperedge per item joining the users who rated it

    With a window, only raters whose timestamp lies in the trailing window
    ``[latest - window, latest]`` of that item are joined, and the bounds are
    kept on the hyperedge. Items with fewer than two (in-window) raters get no
    hyperedge.

    Args:
        store: Ratings; the node universe is its user set
        window: Time span in the timestamp unit (seconds)

    Returns:
        Hypergraph over ``store.user_ids``

    Raises:
        ConfigurationError: A window is given but the store has no timestamps
    """
    if window is not None:
        if not store.has_timestamps:
            raise ConfigurationError("a co-interaction window needs timestamped ratings")
        if window <= 0:
            raise ConfigurationError("the co-interaction window must be positive")

    order = np.lexsort((store.users, store.items))
    items = store.items[order]
    users = store.users[order]
    times = store.timestamps[order] if store.has_timestamps else None
    boundaries = np.flatnonzero(np.diff(items)) + 1
    starts = np.concatenate(([0], boundaries)) if len(items) else np.array([], dtype=np.int64)
    ends = np.concatenate((boundaries, [len(items)])) if len(items) else np.array([], dtype=np.int64)

    hyperedges: List[Hyperedge] = []
    for start, end in zip(starts, ends):
        members = users[start:end]
        bounds = None
        if window is not None:
            stamps = times[start:end]
            latest = float(stamps.max())
            members = members[stamps >= latest - window]
            bounds = (latest - window, latest)
        if len(members) < 2:
            continue
        hyperedges.append(
            Hyperedge(
                members=members.tolist(),
                kind=HyperedgeKind.CO_INTERACTION,
                anchor=store.item_ids[items[start]],
                window=bounds,
            )
        )
    logger.info(f"Built {len(hyperedges)} co-interaction hyperedges from {store.n_items} items")
    return Hypergraph(node_ids=store.user_ids, hyperedges=tuple(hyperedges))


def build_co_preference(features: FeatureMatrix, gamma: float = 0.7) -> Hypergraph:
    """
    Group nodes whose feature vectors are cosine-similar

    Pairs with cosine similarity at least ``gamma`` are linked and every
    connected component of two or more nodes becomes one hyperedge. Nodes
    with a zero feature row have no defined cosine and are left out.

    Args:
        features: Node features
        gamma: Similarity threshold in (0, 1]

    Returns:
        Hypergraph over ``features.node_ids``

    Raises:
        RangeError: gamma outside (0, 1]
    """
    if not 0.0 < gamma <= 1.0:
        raise RangeError(f"gamma must lie in (0, 1], got {gamma}")
    values = features.values
    n = features.n_nodes
    norms = np.linalg.norm(values, axis=1)
    valid = np.flatnonzero(norms > 0)
    if len(valid) < n:
        skipped = [features.node_ids[k] for k in np.flatnonzero(norms == 0)]
        logger.warning(
            f"{len(skipped)} nodes have zero feature vectors and join no co-preference "
            f"hyperedge: {', '.join(skipped[:10])}{' ...' if len(skipped) > 10 else ''}"
        )
    unit = values[valid] / norms[valid, None]

    rows: List[np.ndarray] = []
    cols: List[np.ndarray] = []
    for start in range(0, len(valid), SIMILARITY_CHUNK):
        block = unit[start:start + SIMILARITY_CHUNK] @ unit.T
        r, c = np.nonzero(block >= gamma - COSINE_SLACK)
        rows.append(r + start)
        cols.append(c)
    r = np.concatenate(rows) if rows else np.array([], dtype=np.int64)
    c = np.concatenate(cols) if cols else np.array([], dtype=np.int64)
    linked = sp.csr_matrix((np.ones(len(r)), (r, c)), shape=(len(valid), len(valid)))
    n_components, labels = connected_components(linked, directed=False)

    groups: List[List[int]] = [[] for _ in range(n_components)]
    for position, label in enumerate(labels):
        groups[label].append(int(valid[position]))
    hyperedges = [
        Hyperedge(members=group, kind=HyperedgeKind.CO_PREFERENCE)
        for group in sorted((g for g in groups if len(g) >= 2), key=min)
    ]
    logger.info(f"Built {len(hyperedges)} co-preference hyperedges at gamma={gamma}")
    return Hypergraph(node_ids=features.node_ids, hyperedges=tuple(hyperedges))


def ego_network(social: SocialGraph, node: str) -> SocialGraph:
    """
    Ego network of a node: the node, its in- and out-neighbors and every
    edge among them

    Raises:
        KeyError: Unknown node
    """
    center = social.node_index[node]
    touching = (social.sources == center) | (social.targets == center)
    members = np.union1d(social.sources[touching], social.targets[touching])
    members = np.union1d(members, [center])
    inside = np.isin(social.sources, members) & np.isin(social.targets, members)
    return SocialGraph(
        node_ids=tuple(social.node_ids[k] for k in members),
        sources=np.searchsorted(members, social.sources[inside]),
        targets=np.searchsorted(members, social.targets[inside]),
        weights=social.weights[inside],
    )


def save_hypergraph(h: Hypergraph, path: Union[str, Path]) -> Path:
    """Write ``kind anchor member ...`` lines, ``-`` for a missing anchor"""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", encoding="utf-8") as handle:
        for edge in h.hyperedges:
            handle.write(" ".join((edge.kind.value, edge.anchor or "-") + h.member_ids(edge)) + "\n")
    return path
