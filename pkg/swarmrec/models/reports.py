"""
Report and result models for swarmrec
"""

import json
from enum import Enum
from functools import cached_property
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np
import scipy.sparse as sp
from pydantic import Field, field_validator, model_validator

from .base import BaseModel, BaseReportModel

METRIC_TOLERANCE = 1e-12


class CleanReport(BaseReportModel):
    """Bookkeeping of the cleaning layer

    Entry counts satisfy ``input_entries = kept_entries + removed_below_threshold
    + removed_anomalous_entries + removed_by_degree`` whenever ``input_entries``
    is known. ``removed_isolated`` counts nodes, not entries.
    """

    input_entries: Optional[int] = Field(None, ge=0)
    kept_entries: Optional[int] = Field(None, ge=0)
    removed_duplicates: int = Field(0, ge=0)
    removed_below_threshold: int = Field(0, ge=0)
    removed_anomalous_entries: int = Field(0, ge=0)
    removed_by_degree: int = Field(0, ge=0)
    removed_isolated: int = Field(0, ge=0)
    removed_isolated_ids: List[str] = []
    flagged_anomalies: Dict[str, float] = {}

    @model_validator(mode="after")
    def _check_consistent(self) -> "CleanReport":
        if self.input_entries is not None and self.kept_entries is not None:
            removed = (
                self.removed_below_threshold + self.removed_anomalous_entries + self.removed_by_degree
            )
            if self.kept_entries + removed != self.input_entries:
                raise ValueError("kept and removed entries do not add up to the input size")
        return self

    def combine(self, other: "CleanReport") -> "CleanReport":
        """Merge a later cleaning step's report into this one"""
        flagged = dict(self.flagged_anomalies)
        flagged.update(other.flagged_anomalies)
        return CleanReport(
            input_entries=self.input_entries if self.input_entries is not None else other.input_entries,
            kept_entries=other.kept_entries if other.kept_entries is not None else self.kept_entries,
            removed_duplicates=self.removed_duplicates + other.removed_duplicates,
            removed_below_threshold=self.removed_below_threshold + other.removed_below_threshold,
            removed_anomalous_entries=self.removed_anomalous_entries + other.removed_anomalous_entries,
            removed_by_degree=self.removed_by_degree + other.removed_by_degree,
            removed_isolated=self.removed_isolated + other.removed_isolated,
            removed_isolated_ids=self.removed_isolated_ids + other.removed_isolated_ids,
            flagged_anomalies=flagged,
        )


class TrustTable(BaseModel):
    """Symmetric pairwise trust values in (0, 1]

    Stored as a sparse symmetric user x user matrix; absent pairs had no
    co-rated items and read as trust 0.
    """

    node_ids: Tuple[str, ...]
    matrix: Any

    @field_validator("matrix", mode="before")
    @classmethod
    def _as_csr(cls, value: Any) -> sp.csr_matrix:
        matrix = sp.csr_matrix(value, dtype=np.float64, copy=True)
        matrix.eliminate_zeros()
        matrix.sort_indices()
        return matrix

    @model_validator(mode="after")
    def _check_values(self) -> "TrustTable":
        n = len(self.node_ids)
        if self.matrix.shape != (n, n):
            raise ValueError("trust matrix must cover every user pair")
        data = self.matrix.data
        if data.size and (data.min() <= 0 or data.max() > 1.0 or not np.all(np.isfinite(data))):
            raise ValueError("trust values must lie in (0, 1]")
        if data.size and abs(self.matrix - self.matrix.T).max() > 1e-12:
            raise ValueError("trust must be symmetric")
        if self.matrix.diagonal().any():
            raise ValueError("trust of a user with itself is not stored")
        return self

    @cached_property
    def node_index(self) -> Dict[str, int]:
        return {v: k for k, v in enumerate(self.node_ids)}

    @property
    def n_pairs(self) -> int:
        return int(self.matrix.nnz // 2)

    def get(self, u: str, v: str) -> Optional[float]:
        """Trust between two users, None when they share no co-rated item"""
        i, j = self.node_index.get(u), self.node_index.get(v)
        if i is None or j is None or i == j:
            return None
        row = self.matrix.getrow(i)
        position = np.searchsorted(row.indices, j)
        if position < row.nnz and row.indices[position] == j:
            return float(row.data[position])
        return None

    def pairs(self) -> Dict[Tuple[str, str], float]:
        """All present pairs, both orders"""
        coo = self.matrix.tocoo()
        return {
            (self.node_ids[i], self.node_ids[j]): float(w)
            for i, j, w in zip(coo.row, coo.col, coo.data)
        }

    def aligned(self, node_ids: Sequence[str]) -> sp.csr_matrix:
        """Trust matrix re-indexed onto another node universe (unknown ids get no trust)"""
        positions = np.array([self.node_index.get(v, -1) for v in node_ids], dtype=np.int64)
        known = np.flatnonzero(positions >= 0)
        n = len(node_ids)
        sub = self.matrix[positions[known]][:, positions[known]].tocoo()
        return sp.csr_matrix(
            (sub.data, (known[sub.row], known[sub.col])), shape=(n, n)
        )


class KMetrics(BaseReportModel):
    """Ranking metrics at one cutoff"""

    hr: float = Field(ge=0, le=1)
    mrr: float = Field(ge=0, le=1)
    ndcg: float = Field(ge=0, le=1)
    precision: float = Field(ge=0, le=1)
    recall: float = Field(ge=0, le=1)


class MetricsReport(BaseReportModel):
    """Averaged ranking metrics per cutoff K"""

    metrics: Dict[str, KMetrics]
    users_evaluated: int = Field(ge=0)
    users_skipped: int = Field(0, ge=0)
    config: Dict[str, Any] = {}
    protocol: Dict[str, Any] = {}
    seed: Optional[int] = None

    @model_validator(mode="after")
    def _check_monotone(self) -> "MetricsReport":
        ordered = [self.metrics[k] for k in sorted(self.metrics, key=int)]
        for previous, current in zip(ordered, ordered[1:]):
            if current.hr + METRIC_TOLERANCE < previous.hr:
                raise ValueError("HR@K must be non-decreasing in K")
            if current.recall + METRIC_TOLERANCE < previous.recall:
                raise ValueError("Recall@K must be non-decreasing in K")
        return self

    def at(self, k: int) -> KMetrics:
        return self.metrics[str(k)]

    def to_json(self) -> str:
        return json.dumps(self.model_dump(mode="json"), sort_keys=True, indent=2)


class ScoreTable(BaseReportModel):
    """One user's neighbors and candidate-item scores"""

    user: str
    neighbors: List[Tuple[str, float]]
    scores: Dict[str, float]

    @model_validator(mode="after")
    def _check_row(self) -> "ScoreTable":
        if any(v == self.user for v, _ in self.neighbors):
            raise ValueError("a user is never its own neighbor")
        if any(not np.isfinite(s) for s in self.scores.values()):
            raise ValueError("scores must be finite")
        return self


class Recommendations(BaseReportModel):
    """Top-K lists for a population of users"""

    k: int = Field(ge=1)
    lists: Dict[str, List[Tuple[str, float]]]
    social_fallback: List[str] = []
    popularity_fallback: List[str] = []

    def lines(self) -> List[str]:
        """``user item score rank`` rows, users in list order"""
        rows = []
        for user, items in self.lists.items():
            for rank, (item, value) in enumerate(items, start=1):
                rows.append(f"{user} {item} {value!r} {rank}")
        return rows


class SplitResult(BaseModel):
    """Training store plus per-user held-out item and sampled negatives"""

    train: Any
    held_out: Dict[str, str]
    held_out_ratings: Dict[str, float]
    negatives: Dict[str, Tuple[str, ...]]
    excluded_users: Tuple[str, ...] = ()
    truncated_users: Tuple[str, ...] = ()


class BatchPlan(BaseModel):
    """Disjoint covering partition of node indices into batches"""

    node_ids: Tuple[str, ...]
    assignment: np.ndarray
    n_batches: int
    max_iter: int = 1
    epsilon: float = 1e-4

    @field_validator("assignment", mode="before")
    @classmethod
    def _as_labels(cls, value: Any) -> np.ndarray:
        labels = np.array(value, dtype=np.int64, copy=True)
        labels.setflags(write=False)
        return labels

    @model_validator(mode="after")
    def _check_assignment(self) -> "BatchPlan":
        if self.n_batches < 1:
            raise ValueError("at least one batch is required")
        if self.assignment.shape != (len(self.node_ids),):
            raise ValueError("every node needs a batch")
        if self.assignment.size and (self.assignment.min() < 0 or self.assignment.max() >= self.n_batches):
            raise ValueError("batch label outside 0..n_batches-1")
        return self

    def batches(self) -> List[np.ndarray]:
        """Node indices per batch, ascending within each batch"""
        return [np.flatnonzero(self.assignment == b) for b in range(self.n_batches)]

    def sizes(self) -> List[int]:
        return np.bincount(self.assignment, minlength=self.n_batches).tolist()


class StageStatus(str, Enum):
    OK = "ok"
    SKIPPED = "skipped"
    FAILED = "failed"


class StageRecord(BaseReportModel):
    status: StageStatus
    reason: Optional[str] = None


class RunReport(BaseReportModel):
    """Everything a pipeline run produced

    ``timings`` holds wall-clock seconds and is kept apart from the
    deterministic content (see ``primary_json``).
    """

    config: Dict[str, Any]
    stages: Dict[str, StageRecord] = {}
    preprocess: Optional[CleanReport] = None
    graph: Dict[str, Any] = {}
    dynamics: Dict[str, Any] = {}
    metrics: Optional[MetricsReport] = None
    baseline: Optional[MetricsReport] = None
    references: Dict[str, Any] = {}
    artifacts: Dict[str, str] = {}
    error: Optional[str] = None
    timings: Dict[str, float] = {}

    def primary_json(self) -> str:
        """Deterministic report text (no wall times)"""
        return json.dumps(self.model_dump(mode="json", exclude={"timings"}), sort_keys=True, indent=2)

    def to_json(self) -> str:
        return json.dumps(self.model_dump(mode="json"), sort_keys=True, indent=2)


class OracleResult(BaseReportModel):
    """Reference values computed by a brute-force oracle"""

    name: str
    digest: str
    values: Any
    tolerance: float


class SweepStatus(str, Enum):
    OK = "ok"
    ERROR = "error"


class SweepRow(BaseReportModel):
    """One cell of a parameter sweep"""

    cell: int
    settings: Dict[str, Any]
    status: SweepStatus
    error: Optional[str] = None
    metrics: Dict[str, float] = {}

    def flat(self) -> Dict[str, Any]:
        """Row for the tabular output"""
        row: Dict[str, Any] = {"cell": self.cell, "status": self.status.value, "error": self.error or ""}
        for key, value in sorted(self.settings.items()):
            row[key] = value if not isinstance(value, (list, tuple)) else ",".join(str(v) for v in value)
        row.update(sorted(self.metrics.items()))
        return row
