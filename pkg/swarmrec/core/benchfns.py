"""
Benchmark objectives with catalogued minima and a multi-start compass search
"""

import logging
from concurrent.futures import ProcessPoolExecutor
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np

from ..exceptions import ConfigurationError, DomainError
from ..models.bench import KnownMinimum, MinimumCheck, Objective, OptimizationResult

logger = logging.getLogger(__name__)

CROSS_IN_TRAY_ARGMIN = 1.349406608602084
CROSS_IN_TRAY_MIN = -2.062611870822739
QUOTED_TOLERANCE = 1e-3


def himmelblau(x: np.ndarray) -> float:
    a, b = x
    return float((a ** 2 + b - 11) ** 2 + (a + b ** 2 - 7) ** 2)


def rastrigin(x: np.ndarray) -> float:
    return float(10 * len(x) + np.sum(x ** 2 - 10 * np.cos(2 * np.pi * x)))


def salomon(x: np.ndarray) -> float:
    r = np.sqrt(np.sum(x ** 2))
    return float(1 - np.cos(2 * np.pi * r) + 0.1 * r)


def bukin(x: np.ndarray) -> float:
    a, b = x
    return float(100 * np.sqrt(abs(b - 0.01 * a ** 2)) + 0.01 * abs(a + 10))


def yang_n3(x: np.ndarray) -> float:
    return float(np.sum(np.abs(x)) * np.exp(-np.sum(np.sin(x ** 2))))


def cross_in_tray(x: np.ndarray) -> float:
    a, b = x
    inner = abs(np.sin(a) * np.sin(b) * np.exp(abs(100 - np.sqrt(a ** 2 + b ** 2) / np.pi))) + 1
    return float(-0.0001 * inner ** 0.1)


EVALUATORS: Dict[str, Callable[[np.ndarray], float]] = {
    "himmelblau": himmelblau,
    "rastrigin": rastrigin,
    "salomon": salomon,
    "bukin": bukin,
    "yang-n3": yang_n3,
    "cross-in-tray": cross_in_tray,
}

_HIMMELBLAU_MINIMA = [
    (3.0, 2.0),
    (-2.805118086952745, 3.131312518250573),
    (-3.779310253377747, -3.283185991286170),
    (3.584428340330492, -1.848126526964404),
]

OBJECTIVES: Dict[str, Objective] = {
    "himmelblau": Objective(
        name="himmelblau",
        arity=2,
        lower=(-10.0, -10.0),
        upper=(10.0, 10.0),
        minima=tuple(KnownMinimum(point=list(p), value=0.0) for p in _HIMMELBLAU_MINIMA)
        + (
            KnownMinimum(point=[-3.7793, -3.2832], value=0.0, tolerance=QUOTED_TOLERANCE, source="quoted"),
        ),
    ),
    "rastrigin": Objective(
        name="rastrigin",
        lower=(-10.0,),
        upper=(10.0,),
        minima=(KnownMinimum(point=[0.0, 0.0], value=0.0),),
    ),
    "salomon": Objective(
        name="salomon",
        lower=(-10.0,),
        upper=(10.0,),
        minima=(KnownMinimum(point=[0.0, 0.0], value=0.0),),
    ),
    "bukin": Objective(
        name="bukin",
        arity=2,
        lower=(-15.0, -3.0),
        upper=(-5.0, 3.0),
        minima=(KnownMinimum(point=[-10.0, 1.0], value=0.0),),
    ),
    "yang-n3": Objective(
        name="yang-n3",
        lower=(-10.0,),
        upper=(10.0,),
        minima=(KnownMinimum(point=[0.0, 0.0], value=0.0),),
    ),
    "cross-in-tray": Objective(
        name="cross-in-tray",
        arity=2,
        lower=(-10.0, -10.0),
        upper=(10.0, 10.0),
        minima=tuple(
            KnownMinimum(
                point=[sx * CROSS_IN_TRAY_ARGMIN, sy * CROSS_IN_TRAY_ARGMIN],
                value=CROSS_IN_TRAY_MIN,
                tolerance=1e-6,
                source="grid search refined",
            )
            for sx in (1, -1)
            for sy in (1, -1)
        ),
    ),
}


def get_objective(name: str) -> Objective:
    """
    Raises:
        ConfigurationError: Unknown function name
    """
    try:
        return OBJECTIVES[name]
    except KeyError:
        raise ConfigurationError(
            f"unknown benchmark function {name!r}; choose from {', '.join(sorted(OBJECTIVES))}"
        ) from None


def evaluate(obj: Objective, x: Sequence[float]) -> float:
    """
    Value of the objective at ``x``

    Raises:
        ConfigurationError: Wrong number of coordinates
        DomainError: ``x`` outside the objective's box
    """
    point = np.asarray(x, dtype=np.float64).ravel()
    if obj.arity is not None and point.size != obj.arity:
        raise ConfigurationError(f"{obj.name} takes {obj.arity} coordinates, got {point.size}")
    if point.size == 0:
        raise ConfigurationError(f"{obj.name} needs at least one coordinate")
    lower, upper = obj.bounds(point.size)
    if np.any(point < np.asarray(lower)) or np.any(point > np.asarray(upper)) or not np.all(np.isfinite(point)):
        raise DomainError(f"{point.tolist()} lies outside the {obj.name} domain {list(zip(lower, upper))}")
    return EVALUATORS[obj.name](point)


def verify_minima(obj: Objective, tol: Optional[float] = None) -> List[MinimumCheck]:
    """Evaluate every catalogued minimum; ``tol`` overrides the per-minimum tolerance"""
    checks = []
    for minimum in obj.minima:
        actual = evaluate(obj, minimum.point)
        tolerance = minimum.tolerance if tol is None else tol
        checks.append(
            MinimumCheck(
                point=minimum.point,
                expected=minimum.value,
                actual=actual,
                tolerance=tolerance,
                passed=abs(actual - minimum.value) <= tolerance,
            )
        )
    failed = [c for c in checks if not c.passed]
    if failed:
        logger.warning(f"{len(failed)} catalogued minima of {obj.name} failed verification")
    return checks


def compass_search(
    name: str,
    start: np.ndarray,
    lower: np.ndarray,
    upper: np.ndarray,
    budget: int,
    min_step: float = 1e-12,
) -> Tuple[np.ndarray, float, int]:
    """
    Coordinate descent with a shrinking step

    Tries +step then -step along each coordinate (clipped to the box) and
    takes the first improvement; halves the step after a sweep without one.
    """
    fn = EVALUATORS[name]
    x = np.clip(np.asarray(start, dtype=np.float64), lower, upper)
    fx = fn(x)
    evals = 1
    step = 0.25 * (upper - lower)
    while evals < budget and step.max() > min_step:
        improved = False
        for d in range(len(x)):
            for sign in (1.0, -1.0):
                trial = x.copy()
                trial[d] = min(max(x[d] + sign * step[d], lower[d]), upper[d])
                if trial[d] == x[d]:
                    continue
                value = fn(trial)
                evals += 1
                if value < fx:
                    x, fx = trial, value
                    improved = True
                    break
                if evals >= budget:
                    break
            if evals >= budget:
                break
        if not improved:
            step = step * 0.5
    return x, fx, evals


def _search_task(args):
    return compass_search(*args)


def multistart_optimize(
    obj: Objective,
    restarts: int = 100,
    budget: int = 2000,
    seed: int = 42,
    dimension: int = 2,
    starts: Optional[Sequence[Sequence[float]]] = None,
    workers: int = 1,
) -> OptimizationResult:
    """
    Best of several compass searches

    Starts are seeded uniform draws over the box unless ``starts`` supplies
    explicit points. Ties between restarts are
    broken by the lexicographically smaller point.

    Args:
        obj: Objective
        restarts: Number of searches (at least 1)
        budget: Function evaluations per search
        seed: Seed of the start draws
        dimension: Coordinates for arity-free objectives
        starts: Explicit start points (overrides restarts)
        workers: Processes running searches in parallel

    Raises:
        ConfigurationError: restarts < 1
    """
    if restarts < 1:
        raise ConfigurationError("at least one restart is required")
    dim = obj.arity or dimension
    lower, upper = (np.asarray(b, dtype=np.float64) for b in obj.bounds(dim))
    if starts is not None:
        points = np.asarray(starts, dtype=np.float64).reshape(-1, dim)
    else:
        rng = np.random.default_rng(seed)
        points = lower + (upper - lower) * rng.random((restarts, dim))
    tasks = [(obj.name, p, lower, upper, budget) for p in points]
    if workers > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            outcomes = list(pool.map(_search_task, tasks))
    else:
        outcomes = [_search_task(t) for t in tasks]
    best_x, best_f = None, np.inf
    evals = 0
    for x, fx, used in outcomes:
        evals += used
        if fx < best_f or (fx == best_f and tuple(x) < tuple(best_x)):
            best_x, best_f = x, fx
    logger.info(f"{obj.name}: best value {best_f:.3e} after {len(points)} restarts")
    return OptimizationResult(
        name=obj.name,
        best_point=[float(v) for v in best_x],
        best_value=float(best_f),
        evals=evals,
        restarts=len(points),
    )
