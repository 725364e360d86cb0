"""
Biased random walks, skip-gram training and feature concatenation
"""

import logging
import zlib
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path
from typing import Optional, Sequence, Tuple, Union

import numpy as np
from gensim.models import Word2Vec

from ..data.loaders import load_features, save_features
from ..exceptions import ConfigurationError, EmptyInputError, InputError
from ..models.config import EmbeddingConfig
from ..models.features import CentralityVector, EmbeddingTable, WalkCorpus
from ..models.graph import FeatureMatrix, SimpleGraph

logger = logging.getLogger(__name__)

MIN_LR_FRACTION = 1e-4
UNIGRAM_POWER = 0.75


def _walk_rng(seed: int, strategy: int, node: int, walk: int) -> np.random.Generator:
    return np.random.default_rng([seed, strategy, node, walk])


def _next_step(
    rng: np.random.Generator,
    indptr: np.ndarray,
    indices: np.ndarray,
    previous: int,
    current: int,
    p: float,
    q: float,
) -> int:
    neighbors = indices[indptr[current]:indptr[current + 1]]
    if p == 1.0 and q == 1.0:
        return int(neighbors[rng.integers(len(neighbors))])
    previous_neighbors = indices[indptr[previous]:indptr[previous + 1]]
    positions = np.searchsorted(previous_neighbors, neighbors)
    positions = np.minimum(positions, max(len(previous_neighbors) - 1, 0))
    shared = (
        previous_neighbors[positions] == neighbors
        if len(previous_neighbors)
        else np.zeros(len(neighbors), dtype=bool)
    )
    weights = np.where(shared, 1.0, 1.0 / q)
    weights[neighbors == previous] = 1.0 / p
    cumulative = np.cumsum(weights)
    choice = np.searchsorted(cumulative, rng.random() * cumulative[-1], side="right")
    return int(neighbors[min(choice, len(neighbors) - 1)])


def _walk_chunk(args) -> np.ndarray:
    """Walks for a block of start nodes (top-level so it can run in a worker process)"""
    indptr, indices, starts, length, per_node, strategy, p, q, seed = args
    walks = np.full((per_node * len(starts), length), -1, dtype=np.int64)
    row = 0
    for walk_index in range(per_node):
        for start in starts:
            rng = _walk_rng(seed, strategy, int(start), walk_index)
            walk = walks[row]
            walk[0] = start
            for position in range(1, length):
                current = walk[position - 1]
                if indptr[current] == indptr[current + 1]:
                    break
                if position == 1:
                    neighbors = indices[indptr[current]:indptr[current + 1]]
                    walk[position] = neighbors[rng.integers(len(neighbors))]
                else:
                    walk[position] = _next_step(rng, indptr, indices, walk[position - 2], current, p, q)
            row += 1
    return walks


def generate_walks(
    g: SimpleGraph,
    length: int = 20,
    per_node: int = 10,
    p: float = 1.0,
    q: float = 1.0,
    seed: int = 42,
    strategies: Optional[Sequence[Tuple[float, float]]] = None,
    workers: int = 1,
) -> WalkCorpus:
    """
    Second-order biased random walks

    Every non-isolated node starts ``per_node`` walks per (p, q) strategy. The
    first hop is uniform over neighbors; later hops weight a return to the
    previous node by 1/p, a neighbor of the previous node by 1 and any other
    node by 1/q. Each walk draws from its own generator seeded by (seed,
    strategy, start node, walk index), so the corpus does not depend on
    ``workers``.

    Args:
        g: Graph to walk
        length: Walk length l (>= 2)
        per_node: Walks per start node k (>= 1)
        p: Return parameter
        q: In-out parameter
        seed: Global seed
        strategies: Several (p, q) pairs; overrides ``p`` and ``q``
        workers: Processes used for walk generation

    Returns:
        WalkCorpus with walks ordered by strategy, walk index and start node
    """
    if length < 2 or per_node < 1:
        raise ConfigurationError("walks need length >= 2 and at least one walk per node")
    strategies = tuple(strategies) if strategies else ((p, q),)
    for sp_, sq_ in strategies:
        if sp_ <= 0 or sq_ <= 0:
            raise ConfigurationError("walk parameters p and q must be positive")
    if g.adjacency.nnz == 0:
        logger.warning("Graph has no edges; the walk corpus is empty")
        return WalkCorpus(
            node_ids=g.node_ids,
            walks=np.zeros((0, length), dtype=np.int64),
            length=length,
            per_node=per_node,
            strategies=strategies,
        )

    indptr, indices = g.adjacency.indptr, g.adjacency.indices
    starts = np.flatnonzero(np.diff(indptr) > 0)
    blocks = []
    for strategy_index, (sp_, sq_) in enumerate(strategies):
        chunks = np.array_split(starts, max(1, min(workers, len(starts))))
        jobs = [
            (indptr, indices, chunk, length, per_node, strategy_index, sp_, sq_, seed)
            for chunk in chunks
            if len(chunk)
        ]
        if workers > 1 and len(jobs) > 1:
            with ProcessPoolExecutor(max_workers=workers) as pool:
                parts = list(pool.map(_walk_chunk, jobs))
        else:
            parts = [_walk_chunk(job) for job in jobs]
        # interleave chunks back into (walk index, start node) order
        per_chunk = [part.reshape(per_node, -1, length) for part in parts]
        blocks.append(np.concatenate(per_chunk, axis=1).reshape(-1, length))

    walks = np.concatenate(blocks, axis=0)
    logger.info(f"Generated {len(walks)} walks over {len(starts)} start nodes")
    return WalkCorpus(
        node_ids=g.node_ids,
        walks=walks,
        length=length,
        per_node=per_node,
        strategies=strategies,
    )


def _stable_hash(token: str) -> int:
    """Seeds gensim's per-word init vectors independently of PYTHONHASHSEED"""
    return zlib.crc32(token.encode("utf-8"))


def train_skipgram(corpus: WalkCorpus, cfg: Optional[EmbeddingConfig] = None) -> EmbeddingTable:
    """
    Skip-gram with negative sampling over a walk corpus

    Trains gensim's Word2Vec on the walks (tokens are node indices) with one
    worker thread, no frequent-token downsampling and a learning rate that
    decays linearly to ``MIN_LR_FRACTION`` of its start. Negatives follow
    the unigram distribution raised to 0.75; ``negatives=0`` falls back to
    hierarchical softmax. Nodes that never occur in the corpus keep a zero
    vector and are listed in ``missing``.

    Args:
        corpus: Random walks
        cfg: Embedding settings (dimension, window, negatives, epochs, lr, seed)

    Returns:
        EmbeddingTable over ``corpus.node_ids``

    Raises:
        ConfigurationError: Dimension below 1
        EmptyInputError: Empty corpus
    """
    cfg = cfg or EmbeddingConfig()
    d = cfg.dimension
    if d < 1:
        raise ConfigurationError("embedding dimension must be at least 1")
    if corpus.is_empty:
        raise EmptyInputError("cannot train embeddings on an empty walk corpus")

    sentences = [[str(k) for k in row] for row in corpus.index_sequences()]
    if not any(len(sentence) > 1 for sentence in sentences):
        raise EmptyInputError("walk corpus yields no context pairs")

    model = Word2Vec(
        sentences=sentences,
        vector_size=d,
        window=cfg.window,
        sg=1,
        hs=0 if cfg.negatives else 1,
        negative=cfg.negatives,
        ns_exponent=UNIGRAM_POWER,
        alpha=cfg.learning_rate,
        min_alpha=cfg.learning_rate * MIN_LR_FRACTION,
        min_count=1,
        sample=0,
        epochs=cfg.epochs,
        seed=cfg.seed,
        workers=1,
        hashfxn=_stable_hash,
    )
    logger.debug(f"Skip-gram trained {cfg.epochs} epochs over {len(sentences)} walks")

    n = len(corpus.node_ids)
    vectors = np.zeros((n, d))
    present = np.zeros(n, dtype=bool)
    for token in model.wv.index_to_key:
        vectors[int(token)] = model.wv[token]
        present[int(token)] = True

    missing = tuple(v for v, seen in zip(corpus.node_ids, present) if not seen)
    if missing:
        logger.warning(f"{len(missing)} nodes never occur in the walks and get zero embeddings")
    return EmbeddingTable(
        node_ids=corpus.node_ids,
        vectors=vectors,
        window=cfg.window,
        negatives=cfg.negatives,
        epochs=cfg.epochs,
        learning_rate=cfg.learning_rate,
        seed=cfg.seed,
        missing=missing,
    )


def concat_features(
    emb: EmbeddingTable,
    cent: CentralityVector,
    weights: Tuple[float, float] = (1.0, 1.0),
    normalize: bool = True,
) -> FeatureMatrix:
    """
    Node features [w_emb * embedding | w_cent * (closeness, degree, betweenness)]

    Centralities are min-max normalized unless ``normalize`` is off.

    Raises:
        InputError: The two inputs cover different node sets
    """
    emb_nodes, cent_nodes = set(emb.node_ids), set(cent.node_ids)
    if emb_nodes != cent_nodes:
        difference = sorted(emb_nodes ^ cent_nodes)
        raise InputError(
            f"embedding and centrality node sets differ in {len(difference)} nodes: "
            f"{', '.join(difference[:10])}"
        )
    w_emb, w_cent = weights
    aligned = cent if cent.node_ids == emb.node_ids else cent.take(emb.node_ids)
    if normalize:
        columns = aligned.normalized()
    else:
        columns = np.column_stack([aligned.closeness, aligned.degree, aligned.betweenness])
    values = np.hstack([w_emb * emb.vectors, w_cent * columns])
    return FeatureMatrix(node_ids=emb.node_ids, values=values)


def embed(g: SimpleGraph, cfg: EmbeddingConfig) -> Tuple[WalkCorpus, EmbeddingTable]:
    """Walks plus training with one config"""
    corpus = generate_walks(
        g,
        length=cfg.walk_length,
        per_node=cfg.walks_per_node,
        seed=cfg.seed,
        strategies=cfg.strategies(),
        workers=cfg.workers,
    )
    if corpus.is_empty:
        table = EmbeddingTable(
            node_ids=g.node_ids,
            vectors=np.zeros((g.n_nodes, cfg.dimension)),
            window=cfg.window,
            negatives=cfg.negatives,
            epochs=cfg.epochs,
            learning_rate=cfg.learning_rate,
            seed=cfg.seed,
            missing=g.node_ids,
        )
        return corpus, table
    return corpus, train_skipgram(corpus, cfg)


def save_embeddings(table: EmbeddingTable, path: Union[str, Path]) -> Path:
    return save_features(table.to_feature_matrix(), path)


def load_embeddings(path: Union[str, Path]) -> FeatureMatrix:
    return load_features(path)
