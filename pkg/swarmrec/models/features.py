"""
Node feature models: centralities, walk corpora, embeddings and layer snapshots
"""

from functools import cached_property
from typing import Any, Dict, Iterator, List, Tuple

import numpy as np
import pandas as pd
from pydantic import field_validator, model_validator

from .base import BaseModel
from .graph import FeatureMatrix


def _readonly(values: Any, dtype: Any) -> np.ndarray:
    array = np.array(values, dtype=dtype, copy=True)
    array.setflags(write=False)
    return array


def min_max(values: np.ndarray) -> np.ndarray:
    """Scale to [0, 1]; a constant vector maps to zeros"""
    values = np.asarray(values, dtype=np.float64)
    if values.size == 0:
        return values.copy()
    low, high = values.min(), values.max()
    if high <= low:
        return np.zeros_like(values)
    return (values - low) / (high - low)


class CentralityVector(BaseModel):
    """Per-node degree, closeness and betweenness

    Betweenness counts unordered node pairs for undirected graphs and ordered
    pairs for directed ones, without further normalization.
    """

    node_ids: Tuple[str, ...]
    degree: np.ndarray
    closeness: np.ndarray
    betweenness: np.ndarray
    pair_convention: str = "unordered"

    @field_validator("degree", "closeness", "betweenness", mode="before")
    @classmethod
    def _as_vector(cls, value: Any) -> np.ndarray:
        return _readonly(value, np.float64)

    @model_validator(mode="after")
    def _check_values(self) -> "CentralityVector":
        n = len(self.node_ids)
        for name in ("degree", "closeness", "betweenness"):
            values = getattr(self, name)
            if values.shape != (n,):
                raise ValueError(f"{name} needs one value per node")
            if n and (not np.all(np.isfinite(values)) or values.min() < 0):
                raise ValueError(f"{name} values must be finite and nonnegative")
        return self

    @property
    def n_nodes(self) -> int:
        return len(self.node_ids)

    @cached_property
    def node_index(self) -> Dict[str, int]:
        return {v: k for k, v in enumerate(self.node_ids)}

    def normalized(self) -> np.ndarray:
        """Min-max normalized (closeness, degree, betweenness) columns, n x 3"""
        return np.column_stack(
            [min_max(self.closeness), min_max(self.degree), min_max(self.betweenness)]
        )

    def take(self, node_ids: Tuple[str, ...]) -> "CentralityVector":
        rows = [self.node_index[v] for v in node_ids]
        return CentralityVector(
            node_ids=tuple(node_ids),
            degree=self.degree[rows],
            closeness=self.closeness[rows],
            betweenness=self.betweenness[rows],
            pair_convention=self.pair_convention,
        )

    def to_frame(self) -> pd.DataFrame:
        """Raw and normalized values, one row per node"""
        normalized = self.normalized()
        return pd.DataFrame(
            {
                "node": list(self.node_ids),
                "degree": self.degree,
                "closeness": self.closeness,
                "betweenness": self.betweenness,
                "deg_norm": normalized[:, 1],
                "close_norm": normalized[:, 0],
                "betw_norm": normalized[:, 2],
            }
        )


class WalkCorpus(BaseModel):
    """Random walks stored as a padded index matrix

    Row ``r`` is one walk over indices into ``node_ids``; ``-1`` pads walks
    that stopped early at a dead end.
    """

    node_ids: Tuple[str, ...]
    walks: np.ndarray
    length: int
    per_node: int
    strategies: Tuple[Tuple[float, float], ...]

    @field_validator("walks", mode="before")
    @classmethod
    def _as_matrix(cls, value: Any) -> np.ndarray:
        walks = np.array(value, dtype=np.int64, copy=True)
        if walks.size == 0:
            walks = walks.reshape(0, 0)
        walks.setflags(write=False)
        return walks

    @model_validator(mode="after")
    def _check_walks(self) -> "WalkCorpus":
        if self.walks.size:
            if self.walks.ndim != 2 or self.walks.shape[1] > self.length:
                raise ValueError("walks must be a 2-D array no wider than the walk length")
            if self.walks[:, 0].min() < 0:
                raise ValueError("every walk needs a start node")
            if self.walks.max() >= len(self.node_ids):
                raise ValueError("walk references an unknown node")
        return self

    @property
    def n_walks(self) -> int:
        return int(self.walks.shape[0])

    @property
    def is_empty(self) -> bool:
        return self.n_walks == 0

    def token_count(self) -> int:
        return int((self.walks >= 0).sum())

    def index_sequences(self) -> Iterator[np.ndarray]:
        for row in self.walks:
            yield row[row >= 0]

    def sequences(self) -> List[List[str]]:
        """Walks as node id lists"""
        return [[self.node_ids[k] for k in row] for row in self.index_sequences()]


class EmbeddingTable(BaseModel):
    """Skip-gram node vectors with their training settings"""

    node_ids: Tuple[str, ...]
    vectors: np.ndarray
    window: int
    negatives: int
    epochs: int
    learning_rate: float
    seed: int
    missing: Tuple[str, ...] = ()

    @field_validator("vectors", mode="before")
    @classmethod
    def _as_matrix(cls, value: Any) -> np.ndarray:
        return _readonly(value, np.float64)

    @model_validator(mode="after")
    def _check_vectors(self) -> "EmbeddingTable":
        if self.vectors.ndim != 2 or self.vectors.shape[0] != len(self.node_ids):
            raise ValueError("one embedding row per node is required")
        if not np.all(np.isfinite(self.vectors)):
            raise ValueError("embedding components must be finite")
        return self

    @property
    def dimension(self) -> int:
        return int(self.vectors.shape[1])

    def to_feature_matrix(self) -> FeatureMatrix:
        return FeatureMatrix(node_ids=self.node_ids, values=self.vectors)


class AttentionParameters(BaseModel):
    """Fixed seeded attention vector and square feature transform"""

    attention: np.ndarray
    transform: np.ndarray

    @field_validator("attention", "transform", mode="before")
    @classmethod
    def _as_array(cls, value: Any) -> np.ndarray:
        return _readonly(value, np.float64)

    @model_validator(mode="after")
    def _check_shapes(self) -> "AttentionParameters":
        d = self.transform.shape[0]
        if self.transform.ndim != 2 or self.transform.shape != (d, d):
            raise ValueError("transform must be a square matrix")
        if self.attention.shape not in ((2 * d,), (4 * d,)):
            raise ValueError("attention vector must have length 2d or 4d")
        return self

    @property
    def dimension(self) -> int:
        return int(self.transform.shape[0])


class LayerState(BaseModel):
    """Feature snapshot after a propagation layer"""

    layer: int
    features: FeatureMatrix
