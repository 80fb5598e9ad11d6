"""Hypergraph networks and the graph parameters bounding communication cost and rounds.

Adjacency is the 2-section of the hypergraph: two nodes are neighbours iff
some hyperedge contains both.
"""

import json
import math
from itertools import combinations
from pathlib import Path

import networkx as nx
import numpy as np
import structlog

from app.config import settings
from app.core.exceptions import DomainError, GraphPreconditionError
from app.models.network import Hypergraph
from app.models.schemas import GraphParams

logger = structlog.get_logger()

INFINITY = math.inf


def two_section(g: Hypergraph) -> nx.Graph:
    graph = nx.Graph()
    graph.add_nodes_from(range(g.n))
    for e in g.edges:
        graph.add_edges_from(combinations(e, 2))
    return graph


def is_connected(g: Hypergraph) -> bool:
    return bool(nx.is_connected(two_section(g)))


def is_tree(g: Hypergraph) -> bool:
    """True for ordinary (2-uniform) trees."""
    return g.max_edge_size == 2 and bool(nx.is_tree(two_section(g)))


def distance_matrix(g: Hypergraph) -> np.ndarray:
    """BFS distances in the 2-section; -1 marks unreachable pairs."""
    dist = np.full((g.n, g.n), -1, dtype=int)
    for u, lengths in nx.all_pairs_shortest_path_length(two_section(g)):
        for v, length in lengths.items():
            dist[u, v] = length
    return dist


def diameter(g: Hypergraph) -> float:
    if not is_connected(g):
        return INFINITY
    return int(distance_matrix(g).max())


def edge_radius(g: Hypergraph) -> tuple[float, tuple[int, ...] | None]:
    """r_c(G) = min_e max_u min_{v in e} dis(u, v) with the lowest-index achieving edge."""
    graph = two_section(g)
    if not g.edges or not nx.is_connected(graph):
        return INFINITY, None
    best: tuple[float, tuple[int, ...] | None] = (INFINITY, None)
    for e in g.edges:
        reach = nx.multi_source_dijkstra_path_length(graph, set(e))
        radius = max(reach.values())
        if radius < best[0]:
            best = (radius, e)
    logger.debug("Edge radius computed", value=best[0], central_edge=best[1])
    return best


def _closed_neighbourhoods(g: Hypergraph) -> list[int]:
    masks = [1 << v for v in range(g.n)]
    for e in g.edges:
        edge_mask = sum(1 << v for v in e)
        for v in e:
            masks[v] |= edge_mask
    return masks


def _induces_connected(members: tuple[int, ...], masks: list[int]) -> bool:
    member_mask = sum(1 << v for v in members)
    reached = 1 << members[0]
    frontier = [members[0]]
    while frontier:
        v = frontier.pop()
        fresh = masks[v] & member_mask & ~reached
        reached |= fresh
        frontier.extend(u for u in members if fresh >> u & 1)
    return reached == member_mask


def verify_dominating_set(g: Hypergraph, members: list[int] | tuple[int, ...]) -> bool:
    """True iff ``members`` induces a connected sub-network dominating every node."""
    if not members:
        return False
    masks = _closed_neighbourhoods(g)
    covered = 0
    for v in members:
        covered |= masks[v]
    return covered == (1 << g.n) - 1 and _induces_connected(tuple(sorted(members)), masks)


def connected_domination_number(g: Hypergraph) -> tuple[float, tuple[int, ...]]:
    """Minimum connected dominating set by exhaustive search in increasing size.

    Subsets are enumerated lexicographically, so the witness is the smallest
    achieving set in that order.
    """
    if not is_connected(g):
        return INFINITY, ()
    if g.n > settings.max_domination_nodes:
        raise GraphPreconditionError(
            f"Exact connected domination is limited to {settings.max_domination_nodes} nodes "
            f"(got {g.n})"
        )
    masks = _closed_neighbourhoods(g)
    full = (1 << g.n) - 1
    max_closed = max(m.bit_count() for m in masks)
    # A set of size s covers at most s * max_closed nodes
    smallest = max(1, math.ceil(g.n / max_closed))
    for size in range(smallest, g.n + 1):
        for members in combinations(range(g.n), size):
            covered = 0
            for v in members:
                covered |= masks[v]
            if covered == full and _induces_connected(members, masks):
                logger.debug("Connected dominating set found", size=size, members=members)
                return size, members
    raise AssertionError("the full node set always dominates a connected network")


def domination_chain_radius(g: Hypergraph) -> int:
    """Shortest chain G_0 ⊂_d G_1 ⊂_d ... ⊂_d G_k = G grown from a single edge.

    Each link adds the closed neighbourhood of the current node set.
    """
    if not g.edges or not is_connected(g):
        raise GraphPreconditionError("Domination chains need a connected network")
    masks = _closed_neighbourhoods(g)
    full = (1 << g.n) - 1
    best = g.n
    for e in g.edges:
        current = sum(1 << v for v in e)
        length = 0
        while current != full:
            grown = current
            for v in range(g.n):
                if current >> v & 1:
                    grown |= masks[v]
            current = grown
            length += 1
        best = min(best, length)
    return best


def k_network(n: int, k: int) -> Hypergraph:
    """Complete k-uniform hypergraph on n nodes."""
    if not 2 <= k <= n:
        raise DomainError(f"k-network needs 2 <= k <= n (got n={n}, k={k})")
    return Hypergraph(n=n, edges=list(combinations(range(n), k)))


def non_adjacent_pairs(g: Hypergraph) -> list[tuple[int, int]]:
    graph = two_section(g)
    return [(u, v) for u, v in combinations(range(g.n), 2) if not graph.has_edge(u, v)]


def induced_subnetwork(g: Hypergraph, nodes: list[int]) -> Hypergraph:
    """Hyperedges lying inside ``nodes``, relabelled to 0..len(nodes)-1 in ascending order."""
    kept = sorted(set(nodes))
    relabel = {v: i for i, v in enumerate(kept)}
    edges = [[relabel[v] for v in e] for e in g.edges if set(e) <= set(kept)]
    return Hypergraph(n=len(kept), edges=edges)


def triangle() -> Hypergraph:
    return k_network(3, 2)


def line(n: int) -> Hypergraph:
    """Path L_n: 0 - 1 - ... - (n-1)."""
    return Hypergraph(n=n, edges=[[i, i + 1] for i in range(n - 1)])


def cycle(n: int) -> Hypergraph:
    """Cycle C_n with edges (i, i+1) and (n-1, 0)."""
    if n < 3:
        raise DomainError("A cycle needs at least 3 nodes")
    return Hypergraph(n=n, edges=[[i, (i + 1) % n] for i in range(n)])


def star(leaves: int) -> Hypergraph:
    """K_{1,leaves} with centre 0."""
    return Hypergraph(n=leaves + 1, edges=[[0, i] for i in range(1, leaves + 1)])


def reconstructed_tree() -> Hypergraph:
    """A 16-node tree with r_c = 2 and d_c = 6.

    The edge list is a reconstruction matching these parameters, not a
    published drawing: six internal nodes 0..5 carry the ten leaves 6..15.
    """
    internal = [[0, 1], [0, 2], [0, 3], [1, 4], [1, 5]]
    leaves = {2: [6, 7, 8], 3: [9, 10], 4: [11, 12, 13], 5: [14, 15]}
    edges = internal + [[parent, leaf] for parent, kids in leaves.items() for leaf in kids]
    return Hypergraph(n=16, edges=edges)


def _finite(value: float) -> int | None:
    return None if math.isinf(value) else int(value)


def graph_params(g: Hypergraph) -> GraphParams:
    """All graph parameters of ``g`` with their witnesses."""
    radius, central = edge_radius(g)
    domination, dominating = connected_domination_number(g)
    params = GraphParams(
        n=g.n,
        edges=[list(e) for e in g.edges],
        edge_radius=_finite(radius),
        central_edge=list(central) if central is not None else None,
        connected_domination=_finite(domination),
        dominating_set=list(dominating),
        diameter=_finite(diameter(g)),
        is_tree=is_tree(g),
        distance_matrix=distance_matrix(g).tolist(),
    )
    logger.info(
        "Graph parameters computed",
        n=g.n,
        edge_radius=params.edge_radius,
        connected_domination=params.connected_domination,
    )
    return params


def require_connected(g: Hypergraph) -> None:
    if not g.edges or not is_connected(g):
        raise GraphPreconditionError("The network must be connected")


def parse_hypergraph(text: str) -> Hypergraph:
    """Parse ``{"n": ..., "edges": [[...], ...]}``; extra keys such as "name" are ignored."""
    raw = json.loads(text)
    if not isinstance(raw, dict):
        raw = {}
    return Hypergraph.model_validate({"n": raw.get("n"), "edges": raw.get("edges")})


def load_hypergraph(path: str | Path) -> Hypergraph:
    return parse_hypergraph(Path(path).read_text())


def dump_hypergraph(g: Hypergraph, path: str | Path, name: str | None = None) -> None:
    payload: dict[str, object] = {"n": g.n, "edges": [list(e) for e in g.edges]}
    if name:
        payload = {"name": name, **payload}
    Path(path).write_text(json.dumps(payload) + "\n")
