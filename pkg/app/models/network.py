"""Pydantic models for hypergraph networks and explicit network-state ansätze."""

import math
from itertools import pairwise
from typing import Any, Self

from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from app.models.quantum import DensityMatrix, KrausChannel

# Slack on the weight simplex, absorbed by certification
WEIGHT_TOL = 1e-9


class Hypergraph(BaseModel):
    """Network G: nodes 0..n-1 and hyperedges (sources) shared by their members.

    Edges are stored with members in ascending order; the edge order given
    by the caller is kept because witnesses break ties by edge index.
    """

    model_config = ConfigDict(extra="forbid", frozen=True)

    n: int = Field(ge=2)
    edges: tuple[tuple[int, ...], ...]

    @field_validator("edges", mode="before")
    @classmethod
    def sort_members(cls, v: Any) -> Any:
        if not isinstance(v, list | tuple) or not all(isinstance(e, list | tuple) for e in v):
            return v
        return tuple(tuple(sorted(e)) for e in v)

    @model_validator(mode="after")
    def check_edges(self) -> Self:
        seen: set[tuple[int, ...]] = set()
        for e in self.edges:
            if len(e) < 2:
                raise ValueError(f"Hyperedge {list(e)} has fewer than 2 nodes")
            if any(a == b for a, b in pairwise(e)):
                raise ValueError(f"Hyperedge {list(e)} repeats a node")
            if e[0] < 0 or e[-1] >= self.n:
                raise ValueError(f"Hyperedge {list(e)} leaves the node range 0..{self.n - 1}")
            if e in seen:
                raise ValueError(f"Duplicate hyperedge {list(e)}")
            seen.add(e)
        return self

    @property
    def max_edge_size(self) -> int:
        return max((len(e) for e in self.edges), default=0)

    def incident_edges(self, v: int) -> list[int]:
        return [i for i, e in enumerate(self.edges) if v in e]

    def degree(self, v: int) -> int:
        return len(self.incident_edges(v))


class NetworkAnsatz(BaseModel):
    """A parametrized element of the network-state set: sum_l p_l (⊗_v C_v^l)(⊗_e rho_e^l).

    ``source_dims[e][j]`` is the dimension of the share of source ``e`` held by
    its ``j``-th member (members ascending). Node ``v``'s channel maps the
    product of its incoming share dimensions to ``target_dims[v]``.
    """

    model_config = ConfigDict(frozen=True)

    graph: Hypergraph
    target_dims: tuple[int, ...]
    source_dims: tuple[tuple[int, ...], ...]
    sources: tuple[tuple[DensityMatrix, ...], ...]
    channels: tuple[tuple[KrausChannel, ...], ...]
    weights: tuple[float, ...]

    @model_validator(mode="after")
    def check_consistency(self) -> Self:
        g = self.graph
        if len(self.target_dims) != g.n:
            raise ValueError("target_dims must list one dimension per node")
        if len(self.source_dims) != len(g.edges):
            raise ValueError("source_dims must list one entry per hyperedge")
        for e, dims in zip(g.edges, self.source_dims, strict=True):
            if len(dims) != len(e) or any(d < 1 for d in dims):
                raise ValueError(f"source_dims {dims} do not fit hyperedge {list(e)}")
        size = len(self.weights)
        if len(self.sources) != size or len(self.channels) != size:
            raise ValueError("sources, channels and weights must have the same length")
        for lam in range(size):
            if len(self.sources[lam]) != len(g.edges) or len(self.channels[lam]) != g.n:
                raise ValueError(f"Term {lam} needs one source per edge and one channel per node")
            for e, state in enumerate(self.sources[lam]):
                if state.local_dims != self.source_dims[e]:
                    raise ValueError(
                        f"Source {e} of term {lam} has dims {state.local_dims}, "
                        f"expected {self.source_dims[e]}"
                    )
            for v, ch in enumerate(self.channels[lam]):
                if ch.input_dim != self.node_input_dim(v) or ch.output_dim != self.target_dims[v]:
                    raise ValueError(
                        f"Channel of node {v} maps {ch.input_dim}->{ch.output_dim}, expected "
                        f"{self.node_input_dim(v)}->{self.target_dims[v]}"
                    )
        if any(p < 0 for p in self.weights) or sum(self.weights) > 1.0 + WEIGHT_TOL:
            raise ValueError("Weights must be nonnegative with sum at most 1")
        return self

    @property
    def size(self) -> int:
        return len(self.weights)

    def node_shares(self, v: int) -> list[tuple[int, int]]:
        """(edge index, share dimension) pairs held by node ``v``, edges ascending."""
        return [
            (i, self.source_dims[i][e.index(v)])
            for i, e in enumerate(self.graph.edges)
            if v in e
        ]

    def node_input_dim(self, v: int) -> int:
        return math.prod(d for _, d in self.node_shares(v))

    def replace_term(
        self,
        lam: int,
        *,
        sources: tuple[DensityMatrix, ...] | None = None,
        channels: tuple[KrausChannel, ...] | None = None,
        weight: float | None = None,
    ) -> "NetworkAnsatz":
        """Copy with term ``lam`` updated; the result is re-validated."""
        new_sources = list(self.sources)
        new_channels = list(self.channels)
        new_weights = list(self.weights)
        if sources is not None:
            new_sources[lam] = sources
        if channels is not None:
            new_channels[lam] = channels
        if weight is not None:
            new_weights[lam] = weight
        return NetworkAnsatz(
            graph=self.graph,
            target_dims=self.target_dims,
            source_dims=self.source_dims,
            sources=tuple(new_sources),
            channels=tuple(new_channels),
            weights=tuple(new_weights),
        )
