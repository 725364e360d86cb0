"""
Brute-force reference implementations for cross-checking

Everything here is written directly from the definitions and is slow on
purpose; inputs above the size caps are refused.
"""

import hashlib
import itertools
import json
import math
from collections import deque
from typing import Dict, List, Mapping, Optional, Sequence, Tuple

import numpy as np
from scipy.optimize import minimize

from ..exceptions import OracleRefusal
from ..models.features import CentralityVector
from ..models.graph import SimpleGraph
from ..models.reports import KMetrics, MetricsReport, OracleResult

CLOSENESS_CAP = 40
BETWEENNESS_CAP = 25
EQUILIBRIUM_CAP = 50
EQUILIBRIUM_TOL = 1e-13
EQUILIBRIUM_MAX_ITER = 10 ** 7


def digest(payload) -> str:
    """sha256 of a JSON rendering of the oracle input"""
    text = json.dumps(payload, sort_keys=True, default=lambda o: np.asarray(o).tolist())
    return hashlib.sha256(text.encode("utf-8")).hexdigest()


def _neighbor_lists(g: SimpleGraph) -> List[List[int]]:
    lists: List[List[int]] = [[] for _ in range(g.n_nodes)]
    for s, t, _ in g.edge_list():
        lists[s].append(t)
        if not g.directed:
            lists[t].append(s)
    return [sorted(set(x)) for x in lists]


def _bfs(neighbors: List[List[int]], source: int) -> Dict[int, int]:
    distance = {source: 0}
    queue = deque([source])
    while queue:
        v = queue.popleft()
        for w in neighbors[v]:
            if w not in distance:
                distance[w] = distance[v] + 1
                queue.append(w)
    return distance


def _all_shortest_paths(neighbors: List[List[int]], source: int, target: int) -> List[List[int]]:
    distance = _bfs(neighbors, source)
    if target not in distance:
        return []
    paths = []

    def extend(path: List[int]):
        v = path[-1]
        if v == target:
            paths.append(list(path))
            return
        for w in neighbors[v]:
            if distance.get(w) == distance[v] + 1 and distance[w] <= distance[target]:
                path.append(w)
                extend(path)
                path.pop()

    extend([source])
    return paths


def oracle_centrality(g: SimpleGraph, with_betweenness: bool = True) -> CentralityVector:
    """
    Degree by counting, closeness by per-source BFS, betweenness by enumerating
    every shortest path

    Raises:
        OracleRefusal: More than 40 nodes, or more than 25 with betweenness
    """
    n = g.n_nodes
    if n > CLOSENESS_CAP:
        raise OracleRefusal(f"centrality oracle accepts at most {CLOSENESS_CAP} nodes, got {n}")
    if with_betweenness and n > BETWEENNESS_CAP:
        raise OracleRefusal(f"betweenness oracle accepts at most {BETWEENNESS_CAP} nodes, got {n}")
    neighbors = _neighbor_lists(g)

    degree = [float(len(neighbors[v])) for v in range(n)]
    closeness = []
    for v in range(n):
        total = sum(d for d in _bfs(neighbors, v).values())
        closeness.append(1.0 / total if total > 0 else 0.0)

    betweenness = [0.0] * n
    if with_betweenness:
        if g.directed:
            pairs = [(s, t) for s in range(n) for t in range(n) if s != t]
        else:
            pairs = list(itertools.combinations(range(n), 2))
        for s, t in pairs:
            paths = _all_shortest_paths(neighbors, s, t)
            if not paths:
                continue
            for v in range(n):
                if v in (s, t):
                    continue
                through = sum(1 for path in paths if v in path)
                betweenness[v] += through / len(paths)

    return CentralityVector(
        node_ids=g.node_ids,
        degree=degree,
        closeness=closeness,
        betweenness=betweenness,
        pair_convention="ordered" if g.directed else "unordered",
    )


def centrality_result(g: SimpleGraph) -> OracleResult:
    """Oracle centralities packaged with the input digest"""
    vector = oracle_centrality(g, with_betweenness=g.n_nodes <= BETWEENNESS_CAP)
    return OracleResult(
        name="centrality",
        digest=digest({"nodes": list(g.node_ids), "edges": g.edge_list(), "directed": g.directed}),
        values={
            "node_ids": list(vector.node_ids),
            "degree": vector.degree.tolist(),
            "closeness": vector.closeness.tolist(),
            "betweenness": vector.betweenness.tolist(),
        },
        tolerance=1e-9,
    )


def _primitivity_diagnosis(w: np.ndarray) -> Optional[str]:
    """None when some power of W is positive, otherwise the reason it is not"""
    n = len(w)
    pattern = (w > 0).astype(int)
    reach = pattern.copy()
    for _ in range(n):
        reach = ((reach + reach @ pattern) > 0).astype(int)
    if not reach.all():
        return "not irreducible (some node cannot reach another)"
    power = pattern.copy()
    for _ in range(max(1, n * n - 2 * n + 2)):
        if power.all():
            return None
        power = ((power @ pattern) > 0).astype(int)
    return None if power.all() else "irreducible but periodic"


def oracle_equilibrium(w) -> OracleResult:
    """
    Stationary distribution of a primitive row-stochastic matrix by plain
    dense power iteration on W^T

    ``values`` holds ``{"pi": [...]}``.

    Raises:
        OracleRefusal: More than 50 nodes or a non-primitive matrix
    """
    matrix = np.asarray(w.dense() if hasattr(w, "dense") else w, dtype=np.float64)
    n = len(matrix)
    if n > EQUILIBRIUM_CAP:
        raise OracleRefusal(f"equilibrium oracle accepts at most {EQUILIBRIUM_CAP} nodes, got {n}")
    reason = _primitivity_diagnosis(matrix)
    if reason is not None:
        raise OracleRefusal(f"matrix is not primitive: {reason}")
    pi = np.full(n, 1.0 / n)
    for _ in range(EQUILIBRIUM_MAX_ITER):
        updated = matrix.T @ pi
        if np.abs(updated - pi).sum() < EQUILIBRIUM_TOL:
            pi = updated
            break
        pi = updated
    else:
        raise OracleRefusal("power iteration did not settle")
    pi = pi / pi.sum()
    return OracleResult(
        name="equilibrium",
        digest=digest({"w": matrix}),
        values={"pi": pi.tolist()},
        tolerance=1e-10,
    )


def oracle_consensus(w, initial: Sequence[float]) -> float:
    """pi^T P(0)"""
    pi = np.asarray(oracle_equilibrium(w).values["pi"])
    return float(pi @ np.asarray(initial, dtype=np.float64))


def oracle_metrics(
    rankings: Mapping[str, Sequence[str]],
    relevant: Mapping[str, Sequence[str]],
    k: Sequence[int],
) -> MetricsReport:
    """
    Binary-relevance HR, MRR, NDCG, Precision and Recall written out term by term

    Raises:
        OracleRefusal: A cutoff below 1
    """
    cutoffs = sorted(set(int(x) for x in k))
    if not cutoffs or cutoffs[0] < 1:
        raise OracleRefusal("cutoffs must be at least 1")
    users = [u for u in rankings if len(set(relevant.get(u, ()))) > 0]
    metrics = {}
    for K in cutoffs:
        hr = mrr = ndcg = precision = recall = 0.0
        for u in users:
            rel = set(relevant[u])
            top = list(rankings[u])[:K]
            hit = 0
            for item in top:
                if item in rel:
                    hit = 1
            hr += hit
            first = 0.0
            for rank in range(1, len(top) + 1):
                if top[rank - 1] in rel:
                    first = 1.0 / rank
                    break
            mrr += first
            dcg = 0.0
            for rank in range(1, len(top) + 1):
                r = 1 if top[rank - 1] in rel else 0
                dcg += (2 ** r - 1) / math.log2(rank + 1)
            idcg = 0.0
            for rank in range(1, min(len(rel), K) + 1):
                idcg += 1 / math.log2(rank + 1)
            ndcg += dcg / idcg
            found = len([item for item in top if item in rel])
            precision += found / K
            recall += found / len(rel)
        count = len(users)
        metrics[str(K)] = KMetrics(
            hr=hr / count if count else 0.0,
            mrr=mrr / count if count else 0.0,
            ndcg=min(1.0, ndcg / count) if count else 0.0,
            precision=precision / count if count else 0.0,
            recall=recall / count if count else 0.0,
        )
    return MetricsReport(
        metrics=metrics,
        users_evaluated=len(users),
        users_skipped=len(rankings) - len(users),
    )


_VECTORIZED = {
    "himmelblau": lambda x, y: (x * x + y - 11) ** 2 + (x + y * y - 7) ** 2,
    "rastrigin": lambda x, y: 20 + x * x + y * y - 10 * (np.cos(2 * np.pi * x) + np.cos(2 * np.pi * y)),
    "salomon": lambda x, y: 1 - np.cos(2 * np.pi * np.sqrt(x * x + y * y)) + 0.1 * np.sqrt(x * x + y * y),
    "bukin": lambda x, y: 100 * np.sqrt(np.abs(y - 0.01 * x * x)) + 0.01 * np.abs(x + 10),
    "yang-n3": lambda x, y: (np.abs(x) + np.abs(y)) * np.exp(-(np.sin(x * x) + np.sin(y * y))),
    "cross-in-tray": lambda x, y: -0.0001 * (
        np.abs(np.sin(x) * np.sin(y) * np.exp(np.abs(100 - np.sqrt(x * x + y * y) / np.pi))) + 1
    ) ** 0.1,
}


def oracle_grid_minima(
    name: str,
    lower: Tuple[float, float] = (-10.0, -10.0),
    upper: Tuple[float, float] = (10.0, 10.0),
    step: float = 1e-2,
    slack: float = 1e-3,
) -> OracleResult:
    """
    Global minima of a 2-D objective by grid search plus local refinement

    Grid points within ``slack`` (relative) of the best grid value are
    refined with Nelder-Mead inside the box; refined points closer than 1e-4
    are merged. ``values`` is a list of ``(x, y, f)`` sorted by point.

    Raises:
        OracleRefusal: Unknown objective or a grid above 10^8 points
    """
    if name not in _VECTORIZED:
        raise OracleRefusal(f"no grid oracle for {name}")
    fn = _VECTORIZED[name]
    xs = np.arange(lower[0], upper[0] + step / 2, step)
    ys = np.arange(lower[1], upper[1] + step / 2, step)
    if len(xs) * len(ys) > 10 ** 8:
        raise OracleRefusal("grid too fine")
    values = np.empty((len(xs), len(ys)))
    for row, x in enumerate(xs):
        values[row] = fn(x, ys)
    best = values.min()
    cutoff = best + slack * max(abs(best), 1.0)
    rows, cols = np.nonzero(values <= cutoff)

    def objective(p):
        x = min(max(p[0], lower[0]), upper[0])
        y = min(max(p[1], lower[1]), upper[1])
        return float(fn(x, y))

    refined: List[Tuple[float, float, float]] = []
    for r, c in zip(rows, cols):
        result = minimize(objective, [xs[r], ys[c]], method="Nelder-Mead",
                          options={"xatol": 1e-10, "fatol": 1e-14, "maxiter": 4000})
        x, y = (float(v) for v in result.x)
        f = objective(result.x)
        if all(math.hypot(x - px, y - py) > 1e-4 for px, py, _ in refined):
            refined.append((x, y, f))
    overall = min(f for _, _, f in refined)
    minima = sorted(p for p in refined if p[2] <= overall + slack * max(abs(overall), 1.0))
    return OracleResult(
        name=f"grid-minima:{name}",
        digest=digest({"name": name, "lower": lower, "upper": upper, "step": step}),
        values=minima,
        tolerance=slack,
    )
