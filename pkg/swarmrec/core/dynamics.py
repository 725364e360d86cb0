"""
Preference dynamics: propagation matrices, primitivity, equilibria and consensus simulation
"""

import itertools
import logging
from typing import Callable, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
import scipy.sparse as sp
from scipy.sparse.csgraph import connected_components

from ..exceptions import ConfigurationError, ConvergenceError
from ..models.dynamics import (
    CehsVerdict,
    DcseVerdict,
    EquilibriumResult,
    HierarchicalMatrices,
    LayeredGraph,
    PreferenceState,
    Primitivity,
    PropagationMatrix,
    SimulationResult,
)
from ..models.features import CentralityVector
from ..models.graph import SimpleGraph

logger = logging.getLogger(__name__)

DEFAULT_LAMBDAS = (1 / 3, 1 / 3, 1 / 3)
LAMBDA_LEVELS = (0.1, 0.3, 0.6, 0.9)
EXACT_PRIMITIVE_CAP = 12
EQUILIBRIUM_TOL = 1e-12
EQUILIBRIUM_MAX_ITER = 10 ** 6
DEFAULT_SMOOTHNESS = 0.1

Schedule = Callable[[int, PropagationMatrix], Optional[PropagationMatrix]]


def lambda_grid(levels: Sequence[float] = LAMBDA_LEVELS) -> List[Tuple[float, float, float]]:
    """Every (lambda1, lambda2, lambda3) combination of the levels (64 cells by default)"""
    return [tuple(cell) for cell in itertools.product(levels, repeat=3)]


def _influence(
    g: SimpleGraph,
    cent: Optional[CentralityVector],
    lambdas: Tuple[float, float, float],
) -> np.ndarray:
    """Influence weight of each node as a source: l1*D + l2*C + l3*B on normalized centralities"""
    if cent is None:
        return np.ones(g.n_nodes)
    if cent.node_ids != g.node_ids:
        cent = cent.take(g.node_ids)
    normalized = cent.normalized()  # closeness, degree, betweenness
    l1, l2, l3 = lambdas
    return l1 * normalized[:, 1] + l2 * normalized[:, 0] + l3 * normalized[:, 2]


def _row_normalize(mask: sp.csr_matrix, influence: np.ndarray) -> Tuple[sp.csr_matrix, np.ndarray]:
    """Weight columns by influence and normalize rows; zero-weight rows fall back to uniform"""
    weighted = mask.multiply(influence[None, :]).tocsr()
    weighted.eliminate_zeros()
    has_neighbors = np.diff(mask.indptr) > 0
    totals = np.asarray(weighted.sum(axis=1)).ravel()
    fallback = has_neighbors & (totals <= 0)
    if fallback.any():
        uniform = mask.tocsr().copy()
        keep = np.repeat(fallback, np.diff(uniform.indptr))
        uniform.data = np.where(keep, 1.0, 0.0)
        uniform.eliminate_zeros()
        weighted = (weighted + uniform).tocsr()
        totals = np.asarray(weighted.sum(axis=1)).ravel()
    scale = np.divide(1.0, totals, out=np.zeros_like(totals), where=totals > 0)
    return sp.diags(scale) @ weighted, fallback


def build_weights(
    g: SimpleGraph,
    cent: Optional[CentralityVector] = None,
    lambdas: Tuple[float, float, float] = DEFAULT_LAMBDAS,
    eta: float = 0.5,
) -> PropagationMatrix:
    """
    Row-stochastic W = (1 - eta) I + eta A

    A_ij is proportional to the influence of neighbor j, lambda-mixing its
    normalized degree, closeness and betweenness; rows are normalized to
    sum to 1. Rows whose neighbors all have zero influence use uniform
    weights. Nodes without neighbors keep an identity row.

    Args:
        g: Graph (edge direction i -> j means i listens to j)
        cent: Centralities; uniform influence when None
        lambdas: Mix of degree, closeness and betweenness
        eta: Learning rate in (0, 1]

    Raises:
        ConfigurationError: eta outside (0, 1] or negative lambdas
    """
    if not 0.0 < eta <= 1.0:
        raise ConfigurationError(f"eta must lie in (0, 1], got {eta}")
    if len(lambdas) != 3 or min(lambdas) < 0:
        raise ConfigurationError("lambdas must be three nonnegative weights")
    n = g.n_nodes
    mask = g.binary()
    a, fallback = _row_normalize(mask, _influence(g, cent, lambdas))
    isolated = np.diff(mask.indptr) == 0
    diagonal = np.where(isolated, 1.0, 1.0 - eta)
    scale = np.where(isolated, 0.0, eta)
    matrix = sp.diags(diagonal) + sp.diags(scale) @ a
    if fallback.any():
        logger.warning(f"{int(fallback.sum())} nodes have zero-influence neighborhoods; using uniform weights")
    if isolated.any():
        logger.warning(f"{int(isolated.sum())} nodes have no neighbors and keep their preference")
    return PropagationMatrix(
        node_ids=g.node_ids,
        matrix=matrix,
        eta=eta,
        lambdas=tuple(lambdas),
        fallback_rows=tuple(np.flatnonzero(fallback).tolist()),
        isolated_rows=tuple(np.flatnonzero(isolated).tolist()),
    )


def step(state: PreferenceState, w: PropagationMatrix) -> PreferenceState:
    """P(t + 1) = W P(t)"""
    if state.values.shape[0] != w.size:
        raise ConfigurationError("preference vector and matrix sizes differ")
    return PreferenceState(t=state.t + 1, values=w.matrix @ state.values)


def check_primitive(w: PropagationMatrix, exact_cap: int = EXACT_PRIMITIVE_CAP) -> Primitivity:
    """
    Decide whether some power of W is entrywise positive

    Up to ``exact_cap`` nodes, boolean powers are taken up to the Wielandt
    bound N^2 - 2N + 2. Larger matrices use the structural rule: strongly
    connected with a positive diagonal is primitive, not strongly connected
    is not, anything else is undetermined.
    """
    n = w.size
    if n == 0:
        return Primitivity.UNDETERMINED
    if n <= exact_cap:
        pattern = (w.dense() > 0).astype(np.int64)
        power = pattern.copy()
        for _ in range(n * n - 2 * n + 2):
            if power.all():
                return Primitivity.PRIMITIVE
            power = ((power @ pattern) > 0).astype(np.int64)
        return Primitivity.PRIMITIVE if power.all() else Primitivity.NOT_PRIMITIVE
    n_strong, _ = connected_components(w.matrix, directed=True, connection="strong")
    if n_strong > 1:
        return Primitivity.NOT_PRIMITIVE
    if (w.matrix.diagonal() > 0).all():
        return Primitivity.PRIMITIVE
    return Primitivity.UNDETERMINED


def _closed_classes(matrix: sp.csr_matrix, members: np.ndarray) -> int:
    """Number of strongly connected classes without outgoing edges inside a component"""
    sub = matrix[members][:, members]
    n_strong, labels = connected_components(sub, directed=True, connection="strong")
    coo = sub.tocoo()
    leaving = labels[coo.row] != labels[coo.col]
    open_classes = np.unique(labels[coo.row[leaving]])
    return n_strong - len(open_classes)


def equilibrium(
    w: PropagationMatrix,
    tol: float = EQUILIBRIUM_TOL,
    max_iter: int = EQUILIBRIUM_MAX_ITER,
) -> EquilibriumResult:
    """
    Stationary distribution per weakly connected component

    Power iteration pi <- W^T pi starting from the uniform distribution on
    each component. The predicted consensus of P(0) on a component is
    pi^T P(0) restricted to it.

    Raises:
        ConvergenceError: A component has several closed classes (no unique
            equilibrium) or the iteration does not settle within ``max_iter``
    """
    n = w.size
    n_components, components = connected_components(w.matrix, directed=True, connection="weak")
    for component in range(n_components):
        members = np.flatnonzero(components == component)
        closed = _closed_classes(w.matrix, members)
        if closed > 1:
            raise ConvergenceError(
                f"component of {len(members)} nodes has {closed} closed classes; its limit depends on P(0)"
            )
    sizes = np.bincount(components, minlength=n_components).astype(np.float64)
    pi = 1.0 / sizes[components]
    transposed = w.matrix.T.tocsr()
    residual = np.inf
    iterations = 0
    while iterations < max_iter:
        updated = transposed @ pi
        residual = float(np.abs(updated - pi).sum())
        pi = updated
        iterations += 1
        if residual < tol:
            break
    else:
        raise ConvergenceError("power iteration did not converge", residual=residual)
    totals = np.zeros(n_components)
    np.add.at(totals, components, pi)
    pi = pi / totals[components]
    return EquilibriumResult(
        stationary=pi,
        right_vector=np.ones(n),
        components=components,
        n_components=n_components,
        iterations=iterations,
        residual=residual,
    )


def _component_spread(values: np.ndarray, components: np.ndarray, n_components: int) -> float:
    flat = values.reshape(values.shape[0], -1)
    spread = 0.0
    for component in range(n_components):
        block = flat[components == component]
        spread = max(spread, float((block.max(axis=0) - block.min(axis=0)).max()))
    return spread


def _component_means(values: np.ndarray, components: np.ndarray, n_components: int) -> np.ndarray:
    flat = values.reshape(values.shape[0], -1)
    return np.stack([flat[components == c].mean(axis=0) for c in range(n_components)])


def _lemma_applies(w: PropagationMatrix, components: np.ndarray, n_components: int) -> bool:
    """Every weakly connected component is primitive on its own"""
    for component in range(n_components):
        members = np.flatnonzero(components == component)
        sub = PropagationMatrix(
            node_ids=tuple(w.node_ids[k] for k in members),
            matrix=w.matrix[members][:, members],
        )
        if check_primitive(sub) != Primitivity.PRIMITIVE:
            return False
    return True


def _matrix_delta(previous: PropagationMatrix, current: PropagationMatrix) -> float:
    """Infinity norm of the difference (maximum absolute row sum)"""
    difference = abs(current.matrix - previous.matrix)
    return float(np.asarray(difference.sum(axis=1)).max()) if difference.nnz else 0.0


def _run_consensus(
    w: PropagationMatrix,
    initial: np.ndarray,
    t_max: int,
    tol: float,
    schedule: Optional[Schedule],
    smoothness: float,
    extra_columns: Optional[Callable[[np.ndarray], dict]] = None,
):
    """Iterate P <- W P until the per-component spread drops below tol"""
    n_components, components = connected_components(w.matrix, directed=True, connection="weak")
    values = np.asarray(initial, dtype=np.float64)
    anchor_values = values.copy()
    rows = []
    violations = 0
    t = 0
    spread = _component_spread(values, components, n_components) if values.size else 0.0

    def record():
        row = {"t": t, "spread": spread, "consensus_estimate": float(values.mean())}
        if extra_columns is not None:
            row.update(extra_columns(values))
        rows.append(row)

    record()
    while spread >= tol and t < t_max:
        if schedule is not None:
            replacement = schedule(t, w)
            if replacement is not None and replacement is not w:
                delta = _matrix_delta(w, replacement)
                if delta > smoothness:
                    violations += 1
                    logger.warning(f"Weight schedule jumps by {delta:.3g} at t={t} (bound {smoothness})")
                w = replacement
                n_components, components = connected_components(
                    w.matrix, directed=True, connection="weak"
                )
                anchor_values = values.copy()
        values = w.matrix @ values
        t += 1
        spread = _component_spread(values, components, n_components)
        record()
    return w, values, anchor_values, t, spread, violations, pd.DataFrame(rows)


def simulate_dcse(
    g: SimpleGraph,
    cent: Optional[CentralityVector],
    lambdas: Tuple[float, float, float] = DEFAULT_LAMBDAS,
    eta: float = 0.5,
    initial: Optional[np.ndarray] = None,
    t_max: int = 10 ** 5,
    tol: float = 1e-8,
    schedule: Optional[Schedule] = None,
    smoothness: float = DEFAULT_SMOOTHNESS,
    seed: int = 42,
) -> SimulationResult:
    """
    Simulate flat-graph consensus and compare it with the equilibrium prediction

    The run stops once every weakly connected component agrees to within
    ``tol`` or after ``t_max`` steps. The prediction applies the final
    matrix's stationary distribution to the preferences at the last schedule
    change (P(0) without a schedule).

    Args:
        g: Graph
        cent: Centralities for influence weights (uniform when None)
        lambdas: Centrality mix
        eta: Learning rate
        initial: P(0); seeded uniform draws when omitted
        t_max: Step budget
        tol: Consensus tolerance on the max-minus-min spread
        schedule: Callable (t, W) -> new W or None for time-varying weights
        smoothness: Largest allowed per-change infinity-norm delta before warning
        seed: Seed for the default P(0)

    Returns:
        Trajectory (t, spread, consensus_estimate), final state and verdict
    """
    w = build_weights(g, cent, lambdas, eta)
    if initial is None:
        initial = np.random.default_rng(seed).random(g.n_nodes)
    initial = np.asarray(initial, dtype=np.float64)
    if not np.all(np.isfinite(initial)):
        raise ConfigurationError("initial preferences must be finite")
    return _verdict_run(w, initial, t_max, tol, schedule, smoothness)


def _verdict_run(w, initial, t_max, tol, schedule, smoothness) -> SimulationResult:
    final_w, values, anchor, t, spread, violations, trajectory = _run_consensus(
        w, initial, t_max, tol, schedule, smoothness
    )
    eq = equilibrium(final_w)
    predicted = eq.consensus(anchor).reshape(eq.n_components, -1)
    achieved = _component_means(values, eq.components, eq.n_components)
    error = float(np.abs(predicted - achieved).max()) if predicted.size else 0.0
    converged = spread < tol
    applies = _lemma_applies(final_w, eq.components, eq.n_components)
    violation = applies and (not converged or error > tol + 1e-10)
    if violation:
        logger.error(f"Consensus check failed: converged={converged}, error={error:.3e}")
    verdict = DcseVerdict(
        primitivity=check_primitive(final_w),
        converged=converged,
        steps=t,
        final_spread=spread,
        n_components=eq.n_components,
        predicted=predicted.ravel().tolist(),
        achieved=achieved.ravel().tolist(),
        max_error=error,
        stationary=eq.stationary.tolist(),
        smoothness_violations=violations,
        theorem_violation=violation,
    )
    return SimulationResult(
        trajectory=trajectory,
        final_state=PreferenceState(t=t, values=values),
        verdict=verdict,
    )


def build_hierarchical(
    lg: LayeredGraph,
    cent: Optional[CentralityVector] = None,
    lambdas: Tuple[float, float, float] = DEFAULT_LAMBDAS,
    eta: float = 0.5,
) -> HierarchicalMatrices:
    """
    Split W into horizontal and vertical parts

    W_H = (1 - eta) I + eta (1 - rho_v) A_H and W_V = eta rho_v A_V, with A_H
    row-normalized over same-layer neighbors (centrality influence) and A_V
    over cross-layer neighbors (beta weights). A node without vertical
    neighbors gives the vertical share back to its horizontal neighbors; one
    without horizontal neighbors gives all of eta to its vertical neighbors.

    Raises:
        ConfigurationError: An empty layer or eta outside (0, 1]
    """
    if not 0.0 < eta <= 1.0:
        raise ConfigurationError(f"eta must lie in (0, 1], got {eta}")
    sizes = np.bincount(lg.layer_of, minlength=lg.n_layers)
    if (sizes == 0).any():
        raise ConfigurationError(f"layer {int(np.flatnonzero(sizes == 0)[0])} has no nodes")
    g = lg.graph
    n = g.n_nodes
    rho = lg.rho_v
    horizontal_mask = lg.same_layer_mask()
    vertical_mask = lg.cross_layer_mask()
    beta = lg.beta if lg.beta is not None else np.ones(n)
    a_h, _ = _row_normalize(horizontal_mask, _influence(g, cent, lambdas))
    a_v, _ = _row_normalize(vertical_mask, beta)
    has_h = np.diff(horizontal_mask.indptr) > 0
    has_v = np.diff(vertical_mask.indptr) > 0

    h_share = np.where(has_h & has_v, eta * (1.0 - rho), np.where(has_h, eta, 0.0))
    v_share = np.where(has_h & has_v, eta * rho, np.where(has_v, eta, 0.0))
    isolated = ~has_h & ~has_v
    diagonal = np.where(isolated, 1.0, 1.0 - eta)
    w_h = (sp.diags(diagonal) + sp.diags(h_share) @ a_h).tocsr()
    w_v = (sp.diags(v_share) @ a_v).tocsr()
    w_h.eliminate_zeros()
    w_v.eliminate_zeros()
    shifted = np.flatnonzero(has_h & ~has_v)
    combined = PropagationMatrix(
        node_ids=g.node_ids,
        matrix=w_h + w_v,
        eta=eta,
        lambdas=tuple(lambdas),
        isolated_rows=tuple(np.flatnonzero(isolated).tolist()),
    )
    return HierarchicalMatrices(
        horizontal=w_h,
        vertical=w_v,
        combined=combined,
        shifted_rows=tuple(shifted.tolist()),
    )


def coupling_strengths(lg: LayeredGraph, matrices: HierarchicalMatrices) -> np.ndarray:
    """Mean vertical weight a node of layer l puts on layer l' (k x k)"""
    k = lg.n_layers
    membership = sp.csr_matrix(
        (np.ones(len(lg.layer_of)), (np.arange(len(lg.layer_of)), lg.layer_of)),
        shape=(len(lg.layer_of), k),
    )
    totals = (membership.T @ matrices.vertical @ membership).toarray()
    sizes = np.bincount(lg.layer_of, minlength=k).astype(np.float64)
    return totals / sizes[:, None]


def simulate_cehs(
    lg: LayeredGraph,
    cent: Optional[CentralityVector] = None,
    lambdas: Tuple[float, float, float] = DEFAULT_LAMBDAS,
    eta: float = 0.5,
    initial: Optional[np.ndarray] = None,
    t_max: int = 10 ** 5,
    tol: float = 1e-8,
    seed: int = 42,
) -> SimulationResult:
    """
    Simulate layered consensus under W_C = W_H + W_V

    Besides the flat verdict, reports per-layer predicted and achieved
    values, the coupling matrix, and the first steps at which the
    intra-layer and inter-layer spreads fell below ``tol``. Layers whose
    horizontal subgraph is not strongly connected are logged and listed.
    """
    matrices = build_hierarchical(lg, cent, lambdas, eta)
    n = lg.graph.n_nodes
    if initial is None:
        initial = np.random.default_rng(seed).random(n)
    initial = np.asarray(initial, dtype=np.float64)
    if not np.all(np.isfinite(initial)):
        raise ConfigurationError("initial preferences must be finite")

    horizontal = lg.same_layer_mask()
    weak_layers = []
    for layer in range(lg.n_layers):
        members = lg.layer_members(layer)
        n_strong, _ = connected_components(
            horizontal[members][:, members], directed=True, connection="strong"
        )
        if n_strong > 1:
            weak_layers.append(layer)
            logger.warning(f"Layer {layer} is not strongly connected; its horizontal matrix may not be primitive")

    def layer_columns(values: np.ndarray) -> dict:
        flat = values.reshape(n, -1)
        spreads, means = [], []
        for layer in range(lg.n_layers):
            block = flat[lg.layer_of == layer]
            spreads.append(float((block.max(axis=0) - block.min(axis=0)).max()))
            means.append(block.mean(axis=0))
        means = np.stack(means)
        columns = {
            "intra_spread": max(spreads),
            "inter_spread": float((means.max(axis=0) - means.min(axis=0)).max()),
        }
        columns.update({f"layer_{k}_spread": s for k, s in enumerate(spreads)})
        return columns

    final_w, values, anchor, t, spread, _, trajectory = _run_consensus(
        matrices.combined, initial, t_max, tol, None, DEFAULT_SMOOTHNESS, extra_columns=layer_columns
    )
    eq = equilibrium(final_w)
    predicted = eq.consensus(anchor).reshape(eq.n_components, -1)
    achieved = _component_means(values, eq.components, eq.n_components)
    error = float(np.abs(predicted - achieved).max()) if predicted.size else 0.0
    converged = spread < tol
    violation = _lemma_applies(final_w, eq.components, eq.n_components) and (
        not converged or error > tol + 1e-10
    )
    predicted_map = eq.consensus_map(anchor).reshape(n, -1)
    final = values.reshape(n, -1)
    layer_predicted = [float(predicted_map[lg.layer_of == k].mean()) for k in range(lg.n_layers)]
    layer_achieved = [float(final[lg.layer_of == k].mean()) for k in range(lg.n_layers)]

    intra_hits = trajectory.index[trajectory["intra_spread"] < tol]
    inter_hits = trajectory.index[trajectory["inter_spread"] < tol]
    intra_step = int(trajectory.loc[intra_hits[0], "t"]) if len(intra_hits) else None
    inter_step = int(trajectory.loc[inter_hits[0], "t"]) if len(inter_hits) else None
    separated = None
    if intra_step is not None and inter_step is not None:
        separated = intra_step <= inter_step

    verdict = CehsVerdict(
        primitivity=check_primitive(final_w),
        converged=converged,
        steps=t,
        final_spread=spread,
        n_components=eq.n_components,
        predicted=predicted.ravel().tolist(),
        achieved=achieved.ravel().tolist(),
        max_error=error,
        stationary=eq.stationary.tolist(),
        theorem_violation=violation,
        layer_predicted=layer_predicted,
        layer_achieved=layer_achieved,
        coupling=coupling_strengths(lg, matrices).tolist(),
        intra_converged_step=intra_step,
        inter_converged_step=inter_step,
        timescale_separated=separated,
        layers_not_strongly_connected=weak_layers,
    )
    return SimulationResult(
        trajectory=trajectory,
        final_state=PreferenceState(t=t, values=values),
        verdict=verdict,
    )


def attitude_matrix(g: SimpleGraph, alpha: float, weights: Optional[sp.csr_matrix] = None) -> PropagationMatrix:
    """I - alpha L_w, the matrix form of one attitude step"""
    w = _attitude_weights(g, alpha, weights)
    row_sums = np.asarray(w.sum(axis=1)).ravel()
    matrix = sp.diags(1.0 - alpha * row_sums) + alpha * w
    return PropagationMatrix(node_ids=g.node_ids, matrix=matrix)


def _attitude_weights(g: SimpleGraph, alpha: float, weights: Optional[sp.csr_matrix]) -> sp.csr_matrix:
    if not 0.0 < alpha <= 1.0:
        raise ConfigurationError(f"alpha must lie in (0, 1], got {alpha}")
    w = g.adjacency if weights is None else sp.csr_matrix(weights)
    row_sums = np.asarray(w.sum(axis=1)).ravel()
    if row_sums.size and row_sums.max() > 1.0 + 1e-12:
        raise ConfigurationError("attitude weights of a node must sum to at most 1")
    return w


def attitude_step(
    a: np.ndarray,
    g: SimpleGraph,
    alpha: float,
    weights: Optional[sp.csr_matrix] = None,
) -> np.ndarray:
    """
    One attitude adjustment a_i <- a_i + alpha * sum_j w_ij (a_j - a_i)

    Raises:
        ConfigurationError: alpha outside (0, 1] or a row of weights above 1
    """
    w = _attitude_weights(g, alpha, weights)
    a = np.asarray(a, dtype=np.float64)
    row_sums = np.asarray(w.sum(axis=1)).ravel()
    return a + alpha * (w @ a - row_sums * a)
