"""
Models for preference dynamics: propagation matrices, layered graphs and verdicts
"""

from enum import Enum
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
import scipy.sparse as sp
from pydantic import field_validator, model_validator

from .base import BaseModel, BaseReportModel
from .graph import SimpleGraph

ROW_SUM_TOLERANCE = 1e-12


class Primitivity(str, Enum):
    PRIMITIVE = "primitive"
    NOT_PRIMITIVE = "not-primitive"
    UNDETERMINED = "undetermined"


class PropagationMatrix(BaseModel):
    """Row-stochastic N x N matrix W driving P(t+1) = W P(t)

    ``eta`` is None for matrices that were not built from a graph (the
    diagonal is then unconstrained). Rows listed in ``isolated_rows`` are
    identity rows of nodes without neighbors.
    """

    node_ids: Tuple[str, ...]
    matrix: Any
    eta: Optional[float] = None
    lambdas: Optional[Tuple[float, float, float]] = None
    fallback_rows: Tuple[int, ...] = ()
    isolated_rows: Tuple[int, ...] = ()

    @field_validator("matrix", mode="before")
    @classmethod
    def _as_csr(cls, value: Any) -> sp.csr_matrix:
        matrix = sp.csr_matrix(value, dtype=np.float64, copy=True)
        matrix.sum_duplicates()
        matrix.eliminate_zeros()
        matrix.sort_indices()
        return matrix

    @model_validator(mode="after")
    def _check_stochastic(self) -> "PropagationMatrix":
        n = len(self.node_ids)
        if self.matrix.shape != (n, n):
            raise ValueError("propagation matrix must be N x N over its nodes")
        data = self.matrix.data
        if data.size and (not np.all(np.isfinite(data)) or data.min() < 0):
            raise ValueError("propagation matrix entries must be finite and nonnegative")
        row_sums = np.asarray(self.matrix.sum(axis=1)).ravel()
        if n and np.abs(row_sums - 1.0).max() > ROW_SUM_TOLERANCE * max(1, n):
            raise ValueError("propagation matrix must be row-stochastic")
        if self.eta is not None:
            diagonal = self.matrix.diagonal()
            expected = np.full(n, 1.0 - self.eta)
            expected[list(self.isolated_rows)] = 1.0
            if n and np.abs(diagonal - expected).max() > ROW_SUM_TOLERANCE * max(1, n):
                raise ValueError("diagonal entries must equal 1 - eta")
        return self

    @classmethod
    def from_dense(cls, matrix: Any, node_ids: Optional[Sequence[str]] = None) -> "PropagationMatrix":
        dense = np.asarray(matrix, dtype=np.float64)
        ids = tuple(node_ids) if node_ids is not None else tuple(str(k) for k in range(dense.shape[0]))
        return cls(node_ids=ids, matrix=dense)

    @property
    def size(self) -> int:
        return len(self.node_ids)

    def dense(self) -> np.ndarray:
        return self.matrix.toarray()


class LayeredGraph(BaseModel):
    """Nodes partitioned into layers with horizontal and vertical edges

    One graph holds all edges; an edge is horizontal when both ends share a
    layer and vertical otherwise. ``beta`` weights each node as a vertical
    influence source.
    """

    graph: SimpleGraph
    layer_of: np.ndarray
    n_layers: int
    beta: Optional[np.ndarray] = None
    rho_v: float = 0.2

    @field_validator("layer_of", mode="before")
    @classmethod
    def _as_labels(cls, value: Any) -> np.ndarray:
        labels = np.array(value, dtype=np.int64, copy=True)
        labels.setflags(write=False)
        return labels

    @field_validator("beta", mode="before")
    @classmethod
    def _as_weights(cls, value: Any) -> Optional[np.ndarray]:
        if value is None:
            return None
        weights = np.array(value, dtype=np.float64, copy=True)
        weights.setflags(write=False)
        return weights

    @model_validator(mode="after")
    def _check_layers(self) -> "LayeredGraph":
        n = self.graph.n_nodes
        if self.layer_of.shape != (n,):
            raise ValueError("every node needs exactly one layer")
        if n and (self.layer_of.min() < 0 or self.layer_of.max() >= self.n_layers):
            raise ValueError("layer label outside 0..n_layers-1")
        if not 0.0 <= self.rho_v < 1.0:
            raise ValueError("rho_v must lie in [0, 1)")
        if self.beta is not None:
            if self.beta.shape != (n,) or not np.all(np.isfinite(self.beta)) or self.beta.min() < 0:
                raise ValueError("beta needs one finite nonnegative weight per node")
        return self

    @classmethod
    def from_layers(
        cls,
        layers: Sequence[Sequence[str]],
        horizontal_edges: Sequence[Tuple[str, str]],
        vertical_edges: Sequence[Tuple[str, str]],
        directed: bool = False,
        rho_v: float = 0.2,
        beta: Optional[Dict[str, float]] = None,
    ) -> "LayeredGraph":
        """
        Build from explicit layers and edge lists

        Raises:
            ValueError: Overlapping layers, a horizontal edge across layers or a
                vertical edge inside one layer
        """
        node_ids: List[str] = []
        labels: List[int] = []
        for layer_index, layer in enumerate(layers):
            for node in layer:
                node_ids.append(node)
                labels.append(layer_index)
        if len(set(node_ids)) != len(node_ids):
            raise ValueError("layers must be disjoint")
        index = {v: k for k, v in enumerate(node_ids)}
        edges = []
        for s, t in horizontal_edges:
            if labels[index[s]] != labels[index[t]]:
                raise ValueError(f"horizontal edge {s}-{t} crosses layers")
            edges.append((index[s], index[t], 1.0))
        for s, t in vertical_edges:
            if labels[index[s]] == labels[index[t]]:
                raise ValueError(f"vertical edge {s}-{t} stays inside a layer")
            edges.append((index[s], index[t], 1.0))
        graph = SimpleGraph.from_edges(node_ids, edges, directed=directed)
        beta_values = None if beta is None else [beta.get(v, 1.0) for v in node_ids]
        return cls(
            graph=graph,
            layer_of=labels,
            n_layers=len(layers),
            beta=beta_values,
            rho_v=rho_v,
        )

    def layer_members(self, layer: int) -> np.ndarray:
        return np.flatnonzero(self.layer_of == layer)

    def same_layer_mask(self) -> sp.csr_matrix:
        """Adjacency restricted to horizontal edges (binary)"""
        coo = self.graph.binary().tocoo()
        keep = self.layer_of[coo.row] == self.layer_of[coo.col]
        n = self.graph.n_nodes
        return sp.csr_matrix((coo.data[keep], (coo.row[keep], coo.col[keep])), shape=(n, n))

    def cross_layer_mask(self) -> sp.csr_matrix:
        """Adjacency restricted to vertical edges (binary)"""
        coo = self.graph.binary().tocoo()
        keep = self.layer_of[coo.row] != self.layer_of[coo.col]
        n = self.graph.n_nodes
        return sp.csr_matrix((coo.data[keep], (coo.row[keep], coo.col[keep])), shape=(n, n))


class HierarchicalMatrices(BaseModel):
    """Horizontal part W_H, vertical part W_V and their row-stochastic sum W_C"""

    horizontal: Any
    vertical: Any
    combined: PropagationMatrix
    shifted_rows: Tuple[int, ...] = ()


class PreferenceState(BaseModel):
    """Preferences P(t): one value (or one row) per node at step t"""

    t: int = 0
    values: np.ndarray

    @field_validator("values", mode="before")
    @classmethod
    def _as_array(cls, value: Any) -> np.ndarray:
        array = np.array(value, dtype=np.float64, copy=True)
        array.setflags(write=False)
        return array

    @model_validator(mode="after")
    def _check_finite(self) -> "PreferenceState":
        if not np.all(np.isfinite(self.values)):
            raise ValueError("preferences must be finite")
        return self

    def spread(self) -> float:
        """Largest difference between two nodes' preferences"""
        if self.values.shape[0] == 0:
            return 0.0
        return float(np.max(self.values.max(axis=0) - self.values.min(axis=0)))


class EquilibriumResult(BaseModel):
    """Left Perron vectors per weakly connected component

    ``stationary`` holds each component's stationary distribution at its
    nodes' positions (it sums to 1 within every component). ``right_vector``
    is the all-ones consensus direction.
    """

    stationary: np.ndarray
    right_vector: np.ndarray
    components: np.ndarray
    n_components: int
    iterations: int
    residual: float

    def consensus(self, initial: np.ndarray) -> np.ndarray:
        """Per-component consensus value pi^T P(0), one entry per component"""
        initial = np.asarray(initial, dtype=np.float64)
        weighted = self.stationary.reshape(-1, *([1] * (initial.ndim - 1))) * initial
        totals = np.zeros((self.n_components,) + initial.shape[1:])
        np.add.at(totals, self.components, weighted)
        return totals

    def consensus_map(self, initial: np.ndarray) -> np.ndarray:
        """Predicted limit value at every node"""
        return self.consensus(initial)[self.components]


class DcseVerdict(BaseReportModel):
    """Outcome of a flat-graph consensus simulation"""

    primitivity: Primitivity
    converged: bool
    steps: int
    final_spread: float
    n_components: int
    predicted: List[float]
    achieved: List[float]
    max_error: float
    stationary: List[float]
    smoothness_violations: int = 0
    theorem_violation: bool = False


class CehsVerdict(DcseVerdict):
    """Outcome of a layered consensus simulation"""

    layer_predicted: List[float]
    layer_achieved: List[float]
    coupling: List[List[float]]
    intra_converged_step: Optional[int] = None
    inter_converged_step: Optional[int] = None
    timescale_separated: Optional[bool] = None
    layers_not_strongly_connected: List[int] = []


class SimulationResult(BaseModel):
    """Trajectory table, final state and verdict"""

    trajectory: pd.DataFrame
    final_state: PreferenceState
    verdict: DcseVerdict
