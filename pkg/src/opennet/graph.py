"""Finite directed multigraphs, graph maps and graph fibrations.

Vertices are ``0..vertex_count-1``; edges are indexed by their position
in ``Graph.edges``.  Parallel edges and loops are allowed.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Iterator

__all__ = [
    "Graph", "GraphMap", "GraphError", "MalformedMap",
    "in_neighborhood", "is_fibration", "fibration_failures",
    "enumerate_fibrations", "compose_graph_maps", "identity_graph_map",
]


class GraphError(ValueError):
    pass


class MalformedMap(GraphError):
    pass


@dataclass(frozen=True)
class Graph:
    vertex_count: int
    edges: tuple[tuple[int, int], ...] = ()

    def __post_init__(self):
        edges = tuple((int(s), int(t)) for s, t in self.edges)
        object.__setattr__(self, "edges", edges)
        if self.vertex_count < 0:
            raise GraphError("negative vertex count")
        for i, (s, t) in enumerate(edges):
            if not (0 <= s < self.vertex_count and 0 <= t < self.vertex_count):
                raise GraphError(f"edge {i} = {s}->{t} has an endpoint outside 0..{self.vertex_count - 1}")

    def source(self, e: int) -> int:
        return self.edges[e][0]

    def target(self, e: int) -> int:
        return self.edges[e][1]

    def in_edges(self) -> list[list[int]]:
        """``in_edges()[a]`` lists the edges ending at `a`, ascending."""
        out: list[list[int]] = [[] for _ in range(self.vertex_count)]
        for i, (_, t) in enumerate(self.edges):
            out[t].append(i)
        return out


@dataclass(frozen=True)
class GraphMap:
    vertex_map: tuple[int, ...]
    edge_map: tuple[int, ...]

    def __post_init__(self):
        object.__setattr__(self, "vertex_map", tuple(int(v) for v in self.vertex_map))
        object.__setattr__(self, "edge_map", tuple(int(e) for e in self.edge_map))


def in_neighborhood(g: Graph, a: int) -> list[int]:
    if not 0 <= a < g.vertex_count:
        raise GraphError(f"vertex {a} not in graph with {g.vertex_count} vertices")
    return [i for i, (_, t) in enumerate(g.edges) if t == a]


def check_graph_map(phi: GraphMap, g: Graph, h: Graph) -> None:
    """Raise MalformedMap unless `phi` is an incidence-preserving map g -> h."""
    if len(phi.vertex_map) != g.vertex_count:
        raise MalformedMap(f"vertex map has {len(phi.vertex_map)} entries, graph has {g.vertex_count} vertices")
    if len(phi.edge_map) != len(g.edges):
        raise MalformedMap(f"edge map has {len(phi.edge_map)} entries, graph has {len(g.edges)} edges")
    for a, b in enumerate(phi.vertex_map):
        if not 0 <= b < h.vertex_count:
            raise MalformedMap(f"vertex {a} maps to {b}, outside target")
    for e, e2 in enumerate(phi.edge_map):
        if not 0 <= e2 < len(h.edges):
            raise MalformedMap(f"edge {e} maps to {e2}, outside target")
        s, t = g.edges[e]
        s2, t2 = h.edges[e2]
        if (phi.vertex_map[s], phi.vertex_map[t]) != (s2, t2):
            raise MalformedMap(
                f"edge {e} = {s}->{t} maps to edge {e2} = {s2}->{t2}, "
                f"but vertices map to {phi.vertex_map[s]}->{phi.vertex_map[t]}"
            )


def fibration_failures(phi: GraphMap, g: Graph, h: Graph) -> list[dict]:
    """Vertices where the in-edge lifting condition fails, with the offending edges."""
    check_graph_map(phi, g, h)
    g_in, h_in = g.in_edges(), h.in_edges()
    failures = []
    for a in range(g.vertex_count):
        images = [phi.edge_map[e] for e in g_in[a]]
        want = h_in[phi.vertex_map[a]]
        if sorted(images) == want:
            continue
        missing = [e2 for e2 in want if e2 not in images]
        repeated = sorted({e2 for e2 in images if images.count(e2) > 1})
        failures.append({"vertex": a, "image": phi.vertex_map[a],
                         "unlifted_edges": missing, "multiply_lifted_edges": repeated})
    return failures


def is_fibration(phi: GraphMap, g: Graph, h: Graph) -> bool:
    """True iff every in-neighbourhood of g maps bijectively onto that of its image."""
    return not fibration_failures(phi, g, h)


def identity_graph_map(g: Graph) -> GraphMap:
    return GraphMap(tuple(range(g.vertex_count)), tuple(range(len(g.edges))))


def compose_graph_maps(chi: GraphMap, phi: GraphMap) -> GraphMap:
    """``chi o phi``."""
    return GraphMap(tuple(chi.vertex_map[v] for v in phi.vertex_map),
                    tuple(chi.edge_map[e] for e in phi.edge_map))


def _edge_maps(vmap: tuple[int, ...], g: Graph, h: Graph,
               g_in: list[list[int]], h_in: list[list[int]]) -> Iterator[tuple[int, ...]]:
    # candidates per edge, ascending, so the product search is lexicographic
    cands = []
    for s, t in g.edges:
        cands.append([e2 for e2 in h_in[vmap[t]] if h.edges[e2][0] == vmap[s]])
    used: list[set[int]] = [set() for _ in range(g.vertex_count)]
    chosen: list[int] = []

    def rec(i: int):
        if i == len(g.edges):
            yield tuple(chosen)
            return
        t = g.edges[i][1]
        for e2 in cands[i]:
            if e2 in used[t]:
                continue
            used[t].add(e2)
            chosen.append(e2)
            yield from rec(i + 1)
            chosen.pop()
            used[t].discard(e2)

    yield from rec(0)


def enumerate_fibrations(g: Graph, h: Graph) -> list[GraphMap]:
    """All graph fibrations g -> h, ordered lexicographically by (vertex map, edge map)."""
    g_in, h_in = g.in_edges(), h.in_edges()
    out = []
    for vmap in itertools.product(range(h.vertex_count), repeat=g.vertex_count):
        # a bijection per vertex needs equal in-degrees
        if any(len(g_in[a]) != len(h_in[vmap[a]]) for a in range(g.vertex_count)):
            continue
        # injective per target vertex + equal counts => bijective
        for emap in _edge_maps(vmap, g, h, g_in, h_in):
            out.append(GraphMap(vmap, emap))
    return out
