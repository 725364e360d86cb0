"""
Tests for degree, closeness and betweenness centrality
"""

import networkx as nx
import numpy as np
import pytest

from swarmrec.core import centrality
from swarmrec.core.oracles import oracle_centrality
from swarmrec.models.graph import Hyperedge, HyperedgeKind, Hypergraph, SimpleGraph

from .conftest import cycle_graph, graph_from_pairs, path_graph, random_graph, star_graph


def _to_networkx(g: SimpleGraph):
    graph = nx.DiGraph() if g.directed else nx.Graph()
    graph.add_nodes_from(range(g.n_nodes))
    graph.add_edges_from((s, t) for s, t, _ in g.edge_list())
    return graph


def test_path_graph_values():
    cent = centrality.compute_centrality(path_graph(4))
    assert cent.degree.tolist() == [1.0, 2.0, 2.0, 1.0]
    assert cent.closeness.tolist() == pytest.approx([1 / 6, 1 / 4, 1 / 4, 1 / 6])
    assert cent.betweenness.tolist() == pytest.approx([0.0, 2.0, 2.0, 0.0])


def test_star_center_lies_on_every_leaf_pair():
    cent = centrality.compute_centrality(star_graph(5))
    assert cent.betweenness[0] == pytest.approx(10.0)
    assert cent.betweenness[1:].tolist() == [0.0] * 5


def test_cycle_is_symmetric():
    cent = centrality.compute_centrality(cycle_graph(6))
    assert np.allclose(cent.betweenness, cent.betweenness[0])
    assert np.allclose(cent.closeness, cent.closeness[0])


def test_disconnected_graph_scores_within_component():
    g = graph_from_pairs([(0, 1), (2, 3), (3, 4)], 6)
    cent = centrality.compute_centrality(g)
    assert cent.closeness[0] == pytest.approx(1.0)
    assert cent.closeness[5] == 0.0
    assert cent.betweenness[3] == pytest.approx(1.0)


def test_directed_counts_ordered_pairs():
    g = graph_from_pairs([(0, 1), (1, 2)], 3, directed=True)
    cent = centrality.compute_centrality(g)
    assert cent.pair_convention == "ordered"
    assert cent.betweenness.tolist() == pytest.approx([0.0, 1.0, 0.0])
    assert cent.closeness.tolist() == pytest.approx([1 / 3, 1.0, 0.0])


@pytest.mark.parametrize("seed", range(5))
def test_matches_networkx(seed):
    g = random_graph(30, 0.12, seed)
    cent = centrality.compute_centrality(g, workers=2)
    reference = _to_networkx(g)
    expected_betweenness = nx.betweenness_centrality(reference, normalized=False)
    assert np.allclose(cent.betweenness, [expected_betweenness[v] for v in range(g.n_nodes)], atol=1e-9)
    for v in range(g.n_nodes):
        total = sum(nx.single_source_shortest_path_length(reference, v).values())
        assert cent.closeness[v] == pytest.approx(1.0 / total if total else 0.0)


@pytest.mark.parametrize("seed", range(50))
def test_matches_brute_force(seed):
    rng = np.random.default_rng(seed)
    g = random_graph(int(rng.integers(5, 26)), float(rng.uniform(0.2, 0.6)), 100 + seed)
    cent = centrality.compute_centrality(g)
    reference = oracle_centrality(g)
    assert np.allclose(cent.degree, reference.degree)
    assert np.allclose(cent.closeness, reference.closeness, atol=1e-12)
    assert np.allclose(cent.betweenness, reference.betweenness, atol=1e-9)


@pytest.mark.parametrize("seed", range(10))
def test_relabeling_permutes_scores(seed):
    rng = np.random.default_rng(seed)
    g = random_graph(20, 0.25, 200 + seed)
    perm = rng.permutation(g.n_nodes)
    relabeled = graph_from_pairs([(int(perm[s]), int(perm[t])) for s, t, _ in g.edge_list()], g.n_nodes)
    cent = centrality.compute_centrality(g)
    moved = centrality.compute_centrality(relabeled)
    assert np.allclose(moved.degree[perm], cent.degree)
    assert np.allclose(moved.closeness[perm], cent.closeness, atol=1e-12)
    assert np.allclose(moved.betweenness[perm], cent.betweenness, atol=1e-9)


def test_small_batches_give_same_result(monkeypatch):
    g = random_graph(25, 0.15, 11)
    expected = centrality.compute_centrality(g)
    monkeypatch.setattr(centrality, "BATCH_CELLS", 50)
    batched = centrality.compute_centrality(g, workers=3)
    assert np.allclose(batched.betweenness, expected.betweenness, rtol=0, atol=1e-9)
    assert np.array_equal(batched.closeness, expected.closeness)


def test_projection_is_clique_expansion():
    h = Hypergraph(
        node_ids=("a", "b", "c", "d"),
        hyperedges=(
            Hyperedge(members=[0, 1, 2], kind=HyperedgeKind.CO_INTERACTION, anchor="x"),
            Hyperedge(members=[2, 3], kind=HyperedgeKind.CO_PREFERENCE),
        ),
    )
    g = centrality.project_hypergraph(h)
    assert sorted((s, t) for s, t, _ in g.edge_list()) == [(0, 1), (0, 2), (1, 2), (2, 3)]
    assert set(g.adjacency.data.tolist()) == {1.0}


def test_save_centrality_csv(tmp_path):
    path = centrality.save_centrality(centrality.compute_centrality(path_graph(3)), tmp_path / "c.csv")
    lines = path.read_text().splitlines()
    assert lines[0] == "node,degree,closeness,betweenness,deg_norm,close_norm,betw_norm"
    assert lines[2].startswith("1,2,0.5,1,1,1,1")
