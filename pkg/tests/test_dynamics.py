"""
Tests for preference dynamics: weights, primitivity, equilibria and consensus runs
"""

import numpy as np
import pytest
from scipy.sparse.csgraph import connected_components

from swarmrec.core import centrality, dynamics
from swarmrec.core.oracles import oracle_consensus, oracle_equilibrium
from swarmrec.exceptions import ConfigurationError, ConvergenceError
from swarmrec.models.dynamics import LayeredGraph, PreferenceState, Primitivity, PropagationMatrix
from swarmrec.models.features import CentralityVector

from .conftest import cycle_graph, graph_from_pairs, path_graph, star_graph


def _connected(n: int, seed: int):
    rng = np.random.default_rng(seed)
    pairs = [(k, k + 1) for k in range(n - 1)]
    pairs += [(i, j) for i in range(n) for j in range(i + 2, n) if rng.random() < 0.3]
    return graph_from_pairs(pairs, n)


def _two_layers(rho_v: float = 0.2) -> LayeredGraph:
    return LayeredGraph.from_layers(
        [["a", "b", "c"], ["d", "e", "f"]],
        horizontal_edges=[("a", "b"), ("b", "c"), ("c", "a"), ("d", "e"), ("e", "f"), ("f", "d")],
        vertical_edges=[("a", "d")],
        rho_v=rho_v,
    )


def test_lambda_grid_has_every_combination():
    grid = dynamics.lambda_grid()
    assert len(grid) == 64
    assert (0.1, 0.1, 0.1) in grid and (0.9, 0.6, 0.3) in grid


def test_uniform_weights_on_path():
    w = dynamics.build_weights(path_graph(3), eta=0.5)
    assert np.allclose(w.dense(), [[0.5, 0.5, 0], [0.25, 0.5, 0.25], [0, 0.5, 0.5]])
    assert w.eta == 0.5


def test_isolated_node_keeps_identity_row():
    w = dynamics.build_weights(graph_from_pairs([(0, 1)], 3), eta=0.3)
    assert w.isolated_rows == (2,)
    assert w.dense()[2].tolist() == [0.0, 0.0, 1.0]
    assert np.allclose(w.dense().sum(axis=1), 1.0)


def test_centrality_influence_and_fallback():
    g = star_graph(2)
    cent = CentralityVector(node_ids=g.node_ids, degree=[2, 1, 1], closeness=[1, 0.5, 0.5], betweenness=[1, 0, 0])
    w = dynamics.build_weights(g, cent, lambdas=(1.0, 0.0, 0.0), eta=0.5)
    # the hub's neighbors have zero influence, so it averages them uniformly
    assert w.fallback_rows == (0,)
    assert np.allclose(w.dense(), [[0.5, 0.25, 0.25], [0.5, 0.5, 0], [0.5, 0, 0.5]])


@pytest.mark.parametrize("eta", [0.0, 1.5])
def test_eta_outside_unit_interval(eta):
    with pytest.raises(ConfigurationError):
        dynamics.build_weights(path_graph(2), eta=eta)


def test_negative_lambdas():
    with pytest.raises(ConfigurationError):
        dynamics.build_weights(path_graph(2), lambdas=(0.5, -0.1, 0.6))


def test_non_stochastic_matrix_is_rejected():
    with pytest.raises(ValueError):
        PropagationMatrix.from_dense([[0.5, 0.4], [0.0, 1.0]])


def test_step_multiplies():
    w = dynamics.build_weights(path_graph(3), eta=1.0)
    state = dynamics.step(PreferenceState(values=[0.0, 3.0, 6.0]), w)
    assert state.t == 1
    assert np.allclose(state.values, [3.0, 3.0, 3.0])


def test_step_size_mismatch():
    w = dynamics.build_weights(path_graph(3))
    with pytest.raises(ConfigurationError):
        dynamics.step(PreferenceState(values=[1.0, 2.0]), w)


def test_primitivity_small_matrices():
    assert dynamics.check_primitive(dynamics.build_weights(path_graph(4), eta=0.5)) == Primitivity.PRIMITIVE
    # an even cycle without self-weight is periodic
    assert dynamics.check_primitive(dynamics.build_weights(cycle_graph(4), eta=1.0)) == Primitivity.NOT_PRIMITIVE
    assert dynamics.check_primitive(dynamics.build_weights(cycle_graph(5), eta=1.0)) == Primitivity.PRIMITIVE
    split = graph_from_pairs([(0, 1), (2, 3)], 4)
    assert dynamics.check_primitive(dynamics.build_weights(split)) == Primitivity.NOT_PRIMITIVE


def test_primitivity_structural_rule():
    assert dynamics.check_primitive(dynamics.build_weights(path_graph(20), eta=0.5)) == Primitivity.PRIMITIVE
    assert dynamics.check_primitive(dynamics.build_weights(cycle_graph(20), eta=1.0)) == Primitivity.UNDETERMINED
    split = graph_from_pairs([(k, k + 1) for k in range(9)] + [(k, k + 1) for k in range(10, 19)], 20)
    assert dynamics.check_primitive(dynamics.build_weights(split)) == Primitivity.NOT_PRIMITIVE


@pytest.mark.parametrize("seed", [0, 1, 2])
def test_equilibrium_matches_oracle(seed):
    g = _connected(9, seed)
    w = dynamics.build_weights(g, eta=0.6)
    eq = dynamics.equilibrium(w)
    expected = np.asarray(oracle_equilibrium(w).values["pi"])
    assert eq.n_components == 1
    assert np.allclose(eq.stationary, expected, atol=1e-10)
    # uniform influence on an undirected graph: pi is proportional to degree
    degrees = g.degrees()
    assert np.allclose(eq.stationary, degrees / degrees.sum(), atol=1e-10)


def test_equilibrium_per_component():
    g = graph_from_pairs([(0, 1), (1, 2), (3, 4)], 5)
    eq = dynamics.equilibrium(dynamics.build_weights(g))
    assert eq.n_components == 2
    assert np.allclose(eq.stationary, [0.25, 0.5, 0.25, 0.5, 0.5])
    assert np.allclose(eq.consensus([0.0, 4.0, 8.0, 1.0, 3.0]), [4.0, 2.0])


def test_equilibrium_with_two_closed_classes():
    g = graph_from_pairs([(2, 0), (2, 1)], 3, directed=True)
    with pytest.raises(ConvergenceError):
        dynamics.equilibrium(dynamics.build_weights(g))


def test_dcse_reaches_predicted_consensus():
    g = _connected(8, 4)
    initial = np.linspace(0.0, 1.0, 8)
    result = dynamics.simulate_dcse(g, None, eta=0.5, initial=initial, tol=1e-10)
    verdict = result.verdict
    assert verdict.converged
    assert verdict.primitivity == Primitivity.PRIMITIVE
    assert not verdict.theorem_violation
    pi = dynamics.equilibrium(dynamics.build_weights(g, eta=0.5)).stationary
    assert verdict.predicted == pytest.approx([float(pi @ initial)], abs=1e-9)
    assert verdict.max_error < 1e-9
    assert list(result.trajectory.columns) == ["t", "spread", "consensus_estimate"]
    assert result.trajectory["t"].iloc[-1] == verdict.steps
    assert result.final_state.spread() < 1e-10


def test_dcse_respects_step_budget():
    result = dynamics.simulate_dcse(path_graph(6), None, eta=0.1, initial=np.arange(6.0), t_max=3)
    assert result.verdict.steps == 3
    assert not result.verdict.converged
    assert result.verdict.theorem_violation
    assert len(result.trajectory) == 4


def test_dcse_disconnected_graph():
    g = graph_from_pairs([(0, 1), (2, 3)], 4)
    result = dynamics.simulate_dcse(g, None, initial=[0.0, 2.0, 10.0, 20.0], tol=1e-10)
    assert result.verdict.n_components == 2
    assert result.verdict.achieved == pytest.approx([1.0, 15.0], abs=1e-9)
    assert not result.verdict.theorem_violation


def test_dcse_schedule_counts_jumps():
    g = _connected(6, 1)
    fast = dynamics.build_weights(g, eta=0.9)

    def schedule(t, w):
        return fast if t == 2 else None

    result = dynamics.simulate_dcse(g, None, eta=0.5, initial=np.arange(6.0), tol=1e-10, schedule=schedule)
    assert result.verdict.smoothness_violations == 1
    assert result.verdict.converged
    assert result.verdict.max_error < 1e-9


def test_dcse_rejects_non_finite_initial():
    with pytest.raises(ConfigurationError):
        dynamics.simulate_dcse(path_graph(2), None, initial=[0.0, np.nan])


def test_hierarchical_split():
    lg = _two_layers(rho_v=0.2)
    matrices = dynamics.build_hierarchical(lg, eta=0.5)
    w_h, w_v = matrices.horizontal.toarray(), matrices.vertical.toarray()
    assert np.allclose(w_h[0], [0.5, 0.2, 0.2, 0, 0, 0])
    assert np.allclose(w_v[0], [0, 0, 0, 0.1, 0, 0])
    # b has no vertical neighbor, so all of eta stays in its layer
    assert np.allclose(w_h[1], [0.25, 0.5, 0.25, 0, 0, 0])
    assert matrices.shifted_rows == (1, 2, 4, 5)
    assert np.allclose(matrices.combined.dense().sum(axis=1), 1.0)


def test_coupling_strengths():
    lg = _two_layers()
    coupling = dynamics.coupling_strengths(lg, dynamics.build_hierarchical(lg, eta=0.5))
    assert np.allclose(coupling, [[0, 0.1 / 3], [0.1 / 3, 0]])


def test_empty_layer():
    g = path_graph(3)
    lg = LayeredGraph(graph=g, layer_of=[0, 0, 2], n_layers=3)
    with pytest.raises(ConfigurationError):
        dynamics.build_hierarchical(lg)


def test_horizontal_edge_must_stay_in_layer():
    with pytest.raises(ValueError):
        LayeredGraph.from_layers([["a"], ["b"]], horizontal_edges=[("a", "b")], vertical_edges=[])


def test_cehs_converges_layer_by_layer():
    lg = _two_layers(rho_v=0.1)
    initial = [0.0, 0.2, 0.4, 1.0, 1.2, 1.4]
    result = dynamics.simulate_cehs(lg, eta=0.5, initial=initial, tol=1e-9)
    verdict = result.verdict
    assert verdict.converged
    assert not verdict.theorem_violation
    assert verdict.layer_achieved == pytest.approx(verdict.layer_predicted, abs=1e-8)
    assert verdict.intra_converged_step <= verdict.inter_converged_step
    assert verdict.timescale_separated
    assert verdict.layers_not_strongly_connected == []
    assert {"intra_spread", "inter_spread", "layer_0_spread", "layer_1_spread"} <= set(result.trajectory.columns)


def test_cehs_flags_disconnected_layer():
    lg = LayeredGraph.from_layers(
        [["a", "b", "c"], ["d", "e"]],
        horizontal_edges=[("a", "b"), ("d", "e")],
        vertical_edges=[("c", "d"), ("a", "e")],
    )
    result = dynamics.simulate_cehs(lg, initial=[0.0, 1.0, 2.0, 3.0, 4.0], tol=1e-9)
    assert result.verdict.layers_not_strongly_connected == [0]


def test_attitude_step():
    g = path_graph(2)
    assert np.allclose(dynamics.attitude_step([0.0, 1.0], g, 0.5), [0.5, 0.5])
    matrix = dynamics.attitude_matrix(g, 0.25)
    assert np.allclose(matrix.matrix @ np.array([0.0, 1.0]), dynamics.attitude_step([0.0, 1.0], g, 0.25))


def test_attitude_weights_above_one():
    with pytest.raises(ConfigurationError):
        dynamics.attitude_step(np.zeros(3), star_graph(2), 0.5)


def test_attitude_alpha_range():
    with pytest.raises(ConfigurationError):
        dynamics.attitude_step([0.0, 1.0], path_graph(2), 0.0)


def _strong_digraph(n: int, seed: int):
    rng = np.random.default_rng(seed)
    order = rng.permutation(n)
    pairs = [(int(order[k]), int(order[(k + 1) % n])) for k in range(n)]
    pairs += [(i, j) for i in range(n) for j in range(n) if i != j and rng.random() < 0.2]
    return graph_from_pairs(pairs, n, directed=True)


def _closed_class(w) -> np.ndarray:
    """Members of the strong component that no edge leaves"""
    n_strong, labels = connected_components(w.matrix, directed=True, connection="strong")
    for label in range(n_strong):
        members = np.flatnonzero(labels == label)
        outside = np.setdiff1d(np.arange(w.size), members)
        if w.matrix[members][:, outside].nnz == 0:
            return members
    raise AssertionError("no closed class")


def _connected_block(offset: int, size: int, rng):
    pairs = [(offset + k, offset + k + 1) for k in range(size - 1)]
    pairs += [(offset + i, offset + j) for i in range(size) for j in range(i + 2, size) if rng.random() < 0.3]
    return pairs


def _random_layers(seed: int, rho_v: float):
    rng = np.random.default_rng(seed)
    sizes = rng.integers(2, 9, size=2 + seed % 2)
    layers = [[f"l{layer}n{k}" for k in range(size)] for layer, size in enumerate(sizes)]
    horizontal = []
    for members in layers:
        horizontal += [(members[s], members[t]) for s, t in _connected_block(0, len(members), rng)]
    vertical = []
    for upper, lower in zip(layers, layers[1:]):
        vertical.append((upper[rng.integers(len(upper))], lower[rng.integers(len(lower))]))
        vertical += [(u, v) for u in upper for v in lower if rng.random() < 0.1]
    lg = LayeredGraph.from_layers(layers, horizontal, vertical, rho_v=rho_v)
    return lg, sizes, rng


def test_step_matches_dense_product():
    rng = np.random.default_rng(3)
    w = dynamics.build_weights(_strong_digraph(12, 3), eta=0.4)
    values = rng.standard_normal(12)
    dense = w.dense()
    expected = [sum(dense[i, j] * values[j] for j in range(12)) for i in range(12)]
    np.testing.assert_allclose(dynamics.step(PreferenceState(values=values), w).values, expected, atol=1e-14)


def test_two_cycle_is_not_primitive():
    w = dynamics.build_weights(path_graph(2), eta=1.0)
    assert np.allclose(w.dense(), [[0.0, 1.0], [1.0, 0.0]])
    assert dynamics.check_primitive(w) == Primitivity.NOT_PRIMITIVE


@pytest.mark.parametrize("seed", range(120))
def test_exact_and_structural_primitivity_agree(seed):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(2, 9))
    if seed % 2:
        g = _strong_digraph(n, seed)
    else:
        pairs = [(i, j) for i in range(n) for j in range(n) if i != j and rng.random() < 0.3]
        g = graph_from_pairs(pairs, n, directed=True)
    eta = (0.3, 0.7, 1.0)[seed % 3]
    w = dynamics.build_weights(g, eta=eta)
    structural = dynamics.check_primitive(w, exact_cap=0)
    exact = dynamics.check_primitive(w)
    if structural != Primitivity.UNDETERMINED:
        assert exact == structural
    n_strong, _ = connected_components(g.adjacency, directed=True, connection="strong")
    if n_strong == 1 and eta < 1.0:
        assert exact == structural == Primitivity.PRIMITIVE


@pytest.mark.slow
@pytest.mark.parametrize("eta", [0.1, 0.5, 0.9])
@pytest.mark.parametrize("seed", range(50))
def test_dcse_matches_oracle_on_strongly_connected_digraphs(seed, eta):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(3, 21))
    g = _strong_digraph(n, seed)
    cent = centrality.compute_centrality(g)
    lambdas = tuple(float(x) for x in rng.dirichlet(np.ones(3)))
    initial = rng.random(n)
    result = dynamics.simulate_dcse(g, cent, lambdas=lambdas, eta=eta, initial=initial, tol=1e-10)
    verdict = result.verdict
    assert verdict.converged
    assert verdict.steps <= 10 ** 5
    assert not verdict.theorem_violation
    # zero-influence neighbors lose their in-edges, so compare on the closed class
    w = dynamics.build_weights(g, cent, lambdas, eta)
    closed = _closed_class(w)
    expected = oracle_consensus(w.dense()[np.ix_(closed, closed)], initial[closed])
    assert verdict.achieved[0] == pytest.approx(expected, abs=1e-8)
    assert verdict.predicted[0] == pytest.approx(expected, abs=1e-8)
    spreads = result.trajectory["spread"].to_numpy()
    assert np.all(np.diff(spreads) <= 1e-12)


@pytest.mark.parametrize("seed", range(20))
def test_disconnected_components_reach_their_own_consensus(seed):
    rng = np.random.default_rng(seed)
    sizes = rng.integers(2, 7, size=2 + seed % 2)
    starts = np.concatenate([[0], np.cumsum(sizes)[:-1]])
    pairs = []
    for start, size in zip(starts, sizes):
        pairs += _connected_block(int(start), int(size), rng)
    n = int(sizes.sum())
    g = graph_from_pairs(pairs, n)
    initial = rng.random(n) + np.repeat(2.0 * np.arange(len(sizes)), sizes)
    result = dynamics.simulate_dcse(g, None, eta=0.5, initial=initial, tol=1e-10)
    verdict = result.verdict
    assert verdict.converged
    assert verdict.n_components == len(sizes)

    w = dynamics.build_weights(g, eta=0.5)
    labels = dynamics.equilibrium(w).components
    dense = w.dense()
    for start, size in zip(starts, sizes):
        members = np.arange(start, start + size)
        expected = oracle_consensus(dense[np.ix_(members, members)], initial[members])
        assert verdict.achieved[labels[start]] == pytest.approx(expected, abs=1e-8)
    assert len(set(np.round(verdict.achieved, 6))) == len(sizes)
    assert np.all(np.diff(result.trajectory["spread"].to_numpy()) <= 1e-12)


@pytest.mark.parametrize("seed", range(20))
def test_cehs_without_vertical_share_stays_within_layers(seed):
    lg, sizes, rng = _random_layers(seed, rho_v=0.0)
    initial = rng.random(int(sizes.sum())) + np.repeat(3.0 * np.arange(len(sizes)), sizes)
    result = dynamics.simulate_cehs(lg, eta=0.5, initial=initial, tol=1e-10)
    verdict = result.verdict
    assert verdict.converged
    assert verdict.n_components == len(sizes)
    dense = dynamics.build_hierarchical(lg, eta=0.5).combined.dense()
    for layer in range(len(sizes)):
        members = np.flatnonzero(lg.layer_of == layer)
        expected = oracle_consensus(dense[np.ix_(members, members)], initial[members])
        assert verdict.layer_achieved[layer] == pytest.approx(expected, abs=1e-8)
    assert np.all(np.diff(verdict.layer_achieved) > 1.0)


@pytest.mark.parametrize("seed", range(20))
def test_cehs_with_vertical_share_reaches_global_consensus(seed):
    lg, sizes, rng = _random_layers(seed, rho_v=0.3)
    initial = rng.random(int(sizes.sum())) + np.repeat(3.0 * np.arange(len(sizes)), sizes)
    result = dynamics.simulate_cehs(lg, eta=0.5, initial=initial, tol=1e-10)
    verdict = result.verdict
    assert verdict.converged
    assert verdict.n_components == 1
    expected = oracle_consensus(dynamics.build_hierarchical(lg, eta=0.5).combined, initial)
    assert verdict.achieved[0] == pytest.approx(expected, abs=1e-6)
    assert verdict.layer_achieved == pytest.approx([expected] * len(sizes), abs=1e-6)
