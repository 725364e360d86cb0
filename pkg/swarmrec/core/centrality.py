"""
Degree, closeness and betweenness centrality on simple graphs
"""

import logging
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path
from typing import List, Union

import numpy as np
import scipy.sparse as sp
from scipy.sparse.csgraph import shortest_path

from ..models.features import CentralityVector
from ..models.graph import Hypergraph, SimpleGraph

logger = logging.getLogger(__name__)

# entries of the per-batch n x b work arrays
BATCH_CELLS = 1 << 22


def project_hypergraph(h: Hypergraph) -> SimpleGraph:
    """Clique expansion: two nodes are adjacent iff they share a hyperedge"""
    incidence = h.incidence()
    adjacency = (incidence @ incidence.T).tocsr()
    adjacency.setdiag(0)
    adjacency.eliminate_zeros()
    adjacency.data = np.ones_like(adjacency.data)
    return SimpleGraph(node_ids=h.node_ids, adjacency=adjacency, directed=False)


def degree(g: SimpleGraph) -> np.ndarray:
    """Neighbor count per node"""
    return g.degrees().astype(np.float64)


def _source_batches(n: int) -> List[np.ndarray]:
    size = max(1, min(n, BATCH_CELLS // max(n, 1)))
    return [np.arange(start, min(start + size, n)) for start in range(0, n, size)]


def closeness(g: SimpleGraph) -> np.ndarray:
    """
    Inverse of the summed hop distance to every reachable node

    Only nodes reachable from v enter its sum, so a node is scored within its
    own component; a node that reaches nobody scores 0.
    """
    n = g.n_nodes
    result = np.zeros(n)
    if n == 0:
        return result
    adjacency = g.binary()
    for sources in _source_batches(n):
        distances = shortest_path(adjacency, directed=g.directed, unweighted=True, indices=sources)
        distances[~np.isfinite(distances)] = 0.0
        totals = distances.sum(axis=1)
        result[sources] = np.divide(1.0, totals, out=np.zeros_like(totals), where=totals > 0)
    return result


def _batch_dependencies(adjacency: sp.csr_matrix, sources: np.ndarray) -> np.ndarray:
    """Summed pair dependencies of every node for a batch of BFS sources"""
    n = adjacency.shape[0]
    b = len(sources)
    columns = np.arange(b)
    reverse = adjacency.T.tocsr()
    sigma = np.zeros((n, b))
    depth = np.full((n, b), -1, dtype=np.int64)
    sigma[sources, columns] = 1.0
    depth[sources, columns] = 0

    level = 0
    while True:
        frontier = np.where(depth == level, sigma, 0.0)
        reached = reverse @ frontier
        fresh = (reached > 0) & (depth < 0)
        if not fresh.any():
            break
        level += 1
        sigma[fresh] = reached[fresh]
        depth[fresh] = level

    delta = np.zeros((n, b))
    for current in range(level, 1, -1):
        on_level = depth == current
        carried = np.where(on_level, (1.0 + delta) / np.where(on_level, sigma, 1.0), 0.0)
        pulled = adjacency @ carried
        parents = depth == current - 1
        delta[parents] += sigma[parents] * pulled[parents]
    return delta.sum(axis=1)


def betweenness(g: SimpleGraph, workers: int = 1) -> np.ndarray:
    """
    Shortest-path betweenness by batched dependency accumulation

    Undirected graphs count each unordered pair {s, t} once; directed graphs
    count ordered pairs. Values are not normalized.

    Args:
        g: Graph (edge weights are ignored; paths count hops)
        workers: Threads processing source batches

    Returns:
        Per-node betweenness
    """
    n = g.n_nodes
    if n == 0:
        return np.zeros(0)
    adjacency = g.binary()
    batches = _source_batches(n)
    if workers > 1 and len(batches) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(lambda s: _batch_dependencies(adjacency, s), batches))
    else:
        parts = [_batch_dependencies(adjacency, s) for s in batches]
    # fixed reduction order keeps results identical for any worker count
    total = np.zeros(n)
    for part in parts:
        total += part
    if not g.directed:
        total /= 2.0
    return total


def compute_centrality(g: SimpleGraph, workers: int = 1) -> CentralityVector:
    """All three centralities of a graph"""
    logger.info(f"Computing centralities for {g.n_nodes} nodes and {g.n_edges} edges")
    return CentralityVector(
        node_ids=g.node_ids,
        degree=degree(g),
        closeness=closeness(g),
        betweenness=betweenness(g, workers=workers),
        pair_convention="ordered" if g.directed else "unordered",
    )


def save_centrality(cent: CentralityVector, path: Union[str, Path]) -> Path:
    """Write the per-node CSV with raw and normalized columns"""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    cent.to_frame().to_csv(path, index=False, float_format="%.17g")
    return path
