"""
Shared fixtures for the swarmrec test suite
"""

from pathlib import Path
from typing import Iterable, List, Sequence, Tuple

import numpy as np
import pytest

from swarmrec.models.graph import InteractionStore, SimpleGraph


def graph_from_pairs(pairs: Iterable[Tuple[int, int]], n: int, directed: bool = False) -> SimpleGraph:
    return SimpleGraph.from_edges([str(k) for k in range(n)], [(s, t, 1.0) for s, t in pairs], directed=directed)


def path_graph(n: int) -> SimpleGraph:
    return graph_from_pairs([(k, k + 1) for k in range(n - 1)], n)


def cycle_graph(n: int) -> SimpleGraph:
    return graph_from_pairs([(k, (k + 1) % n) for k in range(n)], n)


def star_graph(leaves: int) -> SimpleGraph:
    return graph_from_pairs([(0, k) for k in range(1, leaves + 1)], leaves + 1)


def random_graph(n: int, p: float, seed: int) -> SimpleGraph:
    rng = np.random.default_rng(seed)
    pairs = [(i, j) for i in range(n) for j in range(i + 1, n) if rng.random() < p]
    return graph_from_pairs(pairs, n)


def synthetic_records(
    n_users: int = 30,
    n_items: int = 40,
    per_user: int = 8,
    seed: int = 7,
) -> List[Tuple[str, str, float, float]]:
    """Clustered ratings: users of a group prefer the group's items"""
    rng = np.random.default_rng(seed)
    records = []
    for u in range(n_users):
        group = u % 3
        preferred = [i for i in range(n_items) if i % 3 == group]
        chosen = rng.choice(preferred, size=min(per_user, len(preferred)), replace=False)
        for step, item in enumerate(chosen):
            rating = float(rng.integers(3, 6))
            records.append((f"u{u}", f"i{item}", rating, float(100 * u + step)))
    return records


def write_lines(path: Path, lines: Sequence[str]) -> Path:
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return path


@pytest.fixture
def small_store() -> InteractionStore:
    return InteractionStore.from_records(
        [
            ("1", "a", 5.0, 1.0),
            ("1", "b", 3.0, 2.0),
            ("1", "c", 4.0, 3.0),
            ("2", "a", 4.0, 1.0),
            ("2", "b", 2.0, 5.0),
            ("3", "c", 1.0, 2.0),
            ("3", "d", 5.0, 4.0),
        ]
    )


@pytest.fixture
def synthetic_store() -> InteractionStore:
    return InteractionStore.from_records(synthetic_records())


@pytest.fixture
def ratings_file(tmp_path) -> Path:
    lines = [f"{u} {i} {r} {int(t)}" for u, i, r, t in synthetic_records()]
    return write_lines(tmp_path / "ratings.txt", lines)


@pytest.fixture
def trust_file(tmp_path) -> Path:
    lines = [f"u{k} u{(k + 3) % 30} 1" for k in range(30)]
    return write_lines(tmp_path / "trust.txt", lines)
