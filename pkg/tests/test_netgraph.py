"""Hypergraph model and graph-parameter tests."""

import math
from itertools import combinations

import pytest
from hypothesis import given, settings as hyp_settings, strategies as st
from pydantic import ValidationError

from app.core import netgraph
from app.core.exceptions import DomainError, GraphPreconditionError
from app.models.network import Hypergraph


@st.composite
def connected_graphs(draw, max_nodes=7):
    """A random spanning path plus random extra pairs."""
    n = draw(st.integers(2, max_nodes))
    order = draw(st.permutations(range(n)))
    edges = {tuple(sorted(pair)) for pair in zip(order, order[1:])}
    extra = draw(st.sets(st.sampled_from(list(combinations(range(n), 2))), max_size=n))
    return Hypergraph(n=n, edges=sorted(edges | extra))


@pytest.mark.parametrize(
    "edges",
    [
        [[0, 0]],  # repeated node
        [[0, 3]],  # out of range
        [[1]],  # too small
        [[0, 1], [1, 0]],  # duplicate after sorting
    ],
)
def test_malformed_hypergraphs_rejected(edges):
    with pytest.raises(ValidationError):
        Hypergraph(n=3, edges=edges)


def test_single_node_rejected():
    with pytest.raises(ValidationError):
        Hypergraph(n=1, edges=[])


def test_edges_sorted_within_and_order_kept():
    g = Hypergraph(n=3, edges=[[2, 1], [0, 2]])
    assert g.edges == ((1, 2), (0, 2))
    assert g.degree(2) == 2
    assert g.incident_edges(0) == [1]


@pytest.mark.parametrize("n", range(2, 13))
def test_line_edge_radius(n):
    value, _ = netgraph.edge_radius(netgraph.line(n))
    assert value == math.ceil(n / 2) - 1


def test_named_network_parameters():
    assert netgraph.edge_radius(netgraph.cycle(5))[0] == 2
    assert netgraph.edge_radius(netgraph.line(4)) == (1, (1, 2))
    assert netgraph.connected_domination_number(netgraph.cycle(4)) == (2, (0, 1))
    assert netgraph.connected_domination_number(netgraph.star(5)) == (1, (0,))


def test_triangle_and_k_network(triangle):
    assert netgraph.edge_radius(triangle)[0] == 1
    assert netgraph.connected_domination_number(triangle)[0] == 1
    g = netgraph.k_network(4, 3)
    assert len(g.edges) == 4
    assert g.max_edge_size == 3
    assert netgraph.edge_radius(g)[0] == 1
    with pytest.raises(DomainError):
        netgraph.k_network(3, 4)


def test_reconstructed_tree():
    g = netgraph.reconstructed_tree()
    params = netgraph.graph_params(g)
    assert params.is_tree
    assert params.edge_radius == 2
    assert params.connected_domination == 6
    assert netgraph.verify_dominating_set(g, params.dominating_set)


def test_disconnected_network():
    g = Hypergraph(n=4, edges=[[0, 1], [2, 3]])
    assert netgraph.edge_radius(g) == (math.inf, None)
    assert netgraph.connected_domination_number(g)[0] == math.inf
    assert netgraph.diameter(g) == math.inf
    assert netgraph.distance_matrix(g)[0, 3] == -1
    with pytest.raises(GraphPreconditionError):
        netgraph.require_connected(g)
    with pytest.raises(GraphPreconditionError):
        netgraph.domination_chain_radius(g)
    params = netgraph.graph_params(g)
    assert params.edge_radius is None
    assert params.connected_domination is None


def test_domination_size_limit():
    with pytest.raises(GraphPreconditionError):
        netgraph.connected_domination_number(netgraph.line(17))


def test_hyperedges_use_two_section():
    g = Hypergraph(n=4, edges=[[0, 1, 2], [2, 3]])
    assert netgraph.distance_matrix(g)[0, 3] == 2
    assert not netgraph.is_tree(g)
    assert netgraph.non_adjacent_pairs(g) == [(0, 3), (1, 3)]


def test_induced_subnetwork():
    sub = netgraph.induced_subnetwork(netgraph.cycle(5), [0, 1, 2, 3])
    assert sub.n == 4
    assert set(sub.edges) == {(0, 1), (1, 2), (2, 3)}


def test_shipped_networks(networks_dir):
    expected = {
        "triangle.json": (1, 1),
        "line4.json": (1, 2),
        "c4.json": (1, 2),
        "c5.json": (2, 3),
        "k4_3.json": (1, 1),
        "fig1_tree.json": (2, 6),
    }
    for name, (radius, domination) in expected.items():
        g = netgraph.load_hypergraph(networks_dir / name)
        assert netgraph.edge_radius(g)[0] == radius, name
        assert netgraph.connected_domination_number(g)[0] == domination, name


def test_dump_and_load(tmp_path):
    path = tmp_path / "c4.json"
    netgraph.dump_hypergraph(netgraph.cycle(4), path, name="C4")
    assert netgraph.load_hypergraph(path) == netgraph.cycle(4)


def test_load_rejects_malformed(tmp_path):
    path = tmp_path / "bad.json"
    path.write_text('{"n": 3, "edges": "not a list"}')
    with pytest.raises(ValidationError):
        netgraph.load_hypergraph(path)


@hyp_settings(max_examples=40, deadline=None)
@given(g=connected_graphs())
def test_graph_parameter_properties(g):
    radius, central = netgraph.edge_radius(g)
    domination, members = netgraph.connected_domination_number(g)
    assert central in g.edges
    assert netgraph.verify_dominating_set(g, members)
    assert radius <= netgraph.diameter(g)
    assert radius == netgraph.domination_chain_radius(g)
    # dropping any member of a minimum set breaks it
    assert len(members) == domination
    assert not any(
        netgraph.verify_dominating_set(g, [m for m in members if m != v]) for v in members
    )


@pytest.mark.slow
def test_edge_radius_matches_domination_chains_exhaustively():
    for n in range(2, 7):
        pairs = list(combinations(range(n), 2))
        for mask in range(1, 1 << len(pairs)):
            edges = [pairs[i] for i in range(len(pairs)) if mask >> i & 1]
            g = Hypergraph(n=n, edges=edges)
            if not netgraph.is_connected(g):
                continue
            assert netgraph.edge_radius(g)[0] == netgraph.domination_chain_radius(g)


@st.composite
def random_trees(draw, max_nodes=12):
    """Node i > 0 hangs below a random earlier node."""
    n = draw(st.integers(2, max_nodes))
    edges = [(draw(st.integers(0, i - 1)), i) for i in range(1, n)]
    return Hypergraph(n=n, edges=edges)


@pytest.mark.parametrize("n", range(3, 11))
def test_line_connected_domination(n):
    domination, members = netgraph.connected_domination_number(netgraph.line(n))
    assert domination == n - 2
    assert sorted(members) == list(range(1, n - 1))


@hyp_settings(max_examples=40, deadline=None)
@given(g=connected_graphs(), data=st.data())
def test_adding_an_edge_never_increases_parameters(g, data):
    missing = netgraph.non_adjacent_pairs(g)
    if not missing:
        return
    pair = data.draw(st.sampled_from(missing))
    denser = Hypergraph(n=g.n, edges=[*g.edges, pair])
    assert netgraph.edge_radius(denser)[0] <= netgraph.edge_radius(g)[0]
    assert (
        netgraph.connected_domination_number(denser)[0]
        <= netgraph.connected_domination_number(g)[0]
    )


@hyp_settings(max_examples=30, deadline=None)
@given(tree=random_trees())
def test_tree_radius_from_diameter(tree):
    assert netgraph.is_tree(tree)
    d = netgraph.diameter(tree)
    assert netgraph.edge_radius(tree)[0] == math.ceil((d + 1) / 2) - 1
