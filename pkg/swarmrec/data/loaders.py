"""
Readers and writers for ratings, trust and feature text files
"""

import logging
import math
from pathlib import Path
from typing import Dict, Iterator, List, Optional, Sequence, Tuple, Union

import numpy as np

from ..exceptions import EmptyInputError, InputError, ParseError, RangeError
from ..models.graph import (
    RATING_MAX,
    RATING_MIN,
    DedupRule,
    FeatureMatrix,
    InteractionStore,
    SocialGraph,
    canonical_ids,
)

logger = logging.getLogger(__name__)

PathLike = Union[str, Path]

# tokens read as a missing rating; the entry is dropped at load
MISSING_TOKENS = frozenset({"nan", "na", "n/a", "null", "none", "?", "-"})
COMMENT_PREFIXES = ("#", "%")


def _data_lines(path: Path) -> Iterator[Tuple[int, List[str]]]:
    if not path.is_file():
        raise InputError(f"file not found: {path}")
    with path.open(encoding="utf-8") as handle:
        for line_number, line in enumerate(handle, start=1):
            stripped = line.strip()
            if not stripped or stripped.startswith(COMMENT_PREFIXES):
                continue
            yield line_number, stripped.replace(",", " ").split()


def _parse_float(token: str, what: str, line_number: int, path: Path) -> float:
    try:
        value = float(token)
    except ValueError:
        raise ParseError(f"{what} is not numeric: {token!r}", line_number, str(path))
    if not math.isfinite(value):
        raise ParseError(f"{what} is not finite: {token!r}", line_number, str(path))
    return value


def load_interactions(
    path: PathLike,
    dedup_rule: Union[str, DedupRule] = DedupRule.KEEP_MAX,
) -> InteractionStore:
    """
    Load a ratings file of ``user item rating [timestamp]`` lines

    Args:
        path: UTF-8 text file; ``#`` lines are comments
        dedup_rule: keep-last or keep-max for repeated (user, item) pairs

    Returns:
        Validated InteractionStore

    Raises:
        ParseError: Missing field or non-numeric rating/timestamp
        RangeError: Rating outside [0, 5]
        EmptyInputError: No usable entries
    """
    path = Path(path)
    records = []
    missing = 0
    for line_number, fields in _data_lines(path):
        if len(fields) < 3:
            raise ParseError("expected 'user item rating [timestamp]'", line_number, str(path))
        user, item, rating_token = fields[0], fields[1], fields[2]
        if rating_token.lower() in MISSING_TOKENS:
            missing += 1
            continue
        rating = _parse_float(rating_token, "rating", line_number, path)
        if rating < RATING_MIN or rating > RATING_MAX:
            raise RangeError(f"{path}:{line_number}: rating {rating} outside [0, 5]")
        timestamp = None
        if len(fields) >= 4:
            timestamp = _parse_float(fields[3], "timestamp", line_number, path)
        records.append((user, item, rating, timestamp))

    if missing:
        logger.warning(f"Dropped {missing} entries with missing ratings from {path}")
    if not records:
        raise EmptyInputError(f"no interactions in {path}")

    with_timestamp = sum(1 for r in records if r[3] is not None)
    if 0 < with_timestamp < len(records):
        logger.warning(
            f"Only {with_timestamp} of {len(records)} entries in {path} carry a timestamp; "
            "timestamps are ignored"
        )
    store = InteractionStore.from_records(records, dedup_rule=dedup_rule)
    if store.duplicates_resolved:
        logger.info(f"Resolved {store.duplicates_resolved} duplicate ratings with {DedupRule(dedup_rule).value}")
    logger.info(
        f"Loaded {store.n_entries} interactions ({store.n_users} users, {store.n_items} items) from {path}"
    )
    return store


def save_interactions(store: InteractionStore, path: PathLike) -> Path:
    """Write a store in the ratings file format (reloads to the same store)"""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", encoding="utf-8") as handle:
        for user, item, rating, timestamp in store.records():
            line = f"{user} {item} {rating!r}"
            if timestamp is not None:
                line = f"{line} {timestamp!r}"
            handle.write(line + "\n")
    return path


def load_social(path: PathLike) -> SocialGraph:
    """
    Load a trust file of ``source target [weight]`` lines

    Self-loops are dropped and counted. Repeated edges keep the last weight.

    Raises:
        ParseError: Missing field or non-numeric weight
        RangeError: Weight outside [0, 1]
    """
    path = Path(path)
    edges: Dict[Tuple[str, str], float] = {}
    nodes = set()
    self_loops = 0
    for line_number, fields in _data_lines(path):
        if len(fields) < 2:
            raise ParseError("expected 'source target [weight]'", line_number, str(path))
        source, target = fields[0], fields[1]
        weight = 1.0
        if len(fields) >= 3:
            weight = _parse_float(fields[2], "weight", line_number, path)
        if weight < 0.0 or weight > 1.0:
            raise RangeError(f"{path}:{line_number}: trust weight {weight} outside [0, 1]")
        nodes.update((source, target))
        if source == target:
            self_loops += 1
            continue
        edges[(source, target)] = weight

    if self_loops:
        logger.warning(f"Dropped {self_loops} self-loop edges from {path}")
    node_ids = canonical_ids(nodes)
    index = {v: k for k, v in enumerate(node_ids)}
    ordered = sorted(edges.items(), key=lambda e: (index[e[0][0]], index[e[0][1]]))
    graph = SocialGraph(
        node_ids=node_ids,
        sources=[index[s] for (s, _), _ in ordered],
        targets=[index[t] for (_, t), _ in ordered],
        weights=[w for _, w in ordered],
        dropped_self_loops=self_loops,
    )
    logger.info(f"Loaded {graph.n_edges} social edges over {graph.n_nodes} nodes from {path}")
    return graph


def save_features(features: FeatureMatrix, path: PathLike) -> Path:
    """Write ``node v1 ... vd`` lines with round-trip float formatting"""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", encoding="utf-8") as handle:
        for node, row in zip(features.node_ids, features.values):
            handle.write(node + " " + " ".join(repr(float(v)) for v in row) + "\n")
    return path


def load_features(path: PathLike) -> FeatureMatrix:
    """
    Read ``node v1 ... vd`` lines

    Raises:
        ParseError: Non-numeric component or rows of different length
    """
    path = Path(path)
    node_ids: List[str] = []
    rows: List[List[float]] = []
    dimension: Optional[int] = None
    for line_number, fields in _data_lines(path):
        if len(fields) < 2:
            raise ParseError("expected 'node v1 ... vd'", line_number, str(path))
        values = [_parse_float(token, "component", line_number, path) for token in fields[1:]]
        if dimension is None:
            dimension = len(values)
        elif len(values) != dimension:
            raise ParseError(f"expected {dimension} components, got {len(values)}", line_number, str(path))
        node_ids.append(fields[0])
        rows.append(values)
    if not rows:
        raise EmptyInputError(f"no feature rows in {path}")
    return FeatureMatrix(node_ids=tuple(node_ids), values=np.array(rows))


def count_trust_lines(path: PathLike) -> Tuple[int, int, int]:
    """Line scan of a trust file: (distinct ids, data lines, self-loop lines)"""
    ids = set()
    lines = 0
    loops = 0
    for _, fields in _data_lines(Path(path)):
        lines += 1
        ids.update(fields[:2])
        loops += fields[0] == fields[1]
    return len(ids), lines, loops
