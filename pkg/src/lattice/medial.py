"""
Medial graph of a domain.

Medial vertices are midpoints of primal edges, stored in doubled coordinates
(the midpoint of u-w is u+w), so every coordinate is an integer. Medial edges
join diagonal neighbours and carry a fixed orientation: a medial vertex on a
horizontal primal edge is entered from NE and SW and left towards NW and SE; a
vertical one is entered from SE and NW and left towards SW and NE.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Dict, FrozenSet, List, Optional, Tuple

from src.errors import InvalidMarks
from src.lattice.domain import Domain, Edge, Point, canonical_edge

logger = logging.getLogger(__name__)

MedialVertex = Tuple[int, int]
MedialEdge = Tuple[MedialVertex, MedialVertex]  # (source, target)

DIAGONALS: Tuple[Tuple[int, int], ...] = ((1, 1), (1, -1), (-1, -1), (-1, 1))  # NE, SE, SW, NW


def midpoint(u: Point, w: Point) -> MedialVertex:
    return (u[0] + w[0], u[1] + w[1])


def is_horizontal(m: MedialVertex) -> bool:
    return m[0] % 2 == 1


def primal_edge(m: MedialVertex) -> Edge:
    mx, my = m
    if mx % 2:
        return ((mx - 1) // 2, my // 2), ((mx + 1) // 2, my // 2)
    return (mx // 2, (my - 1) // 2), (mx // 2, (my + 1) // 2)


def orient(m1: MedialVertex, m2: MedialVertex) -> MedialEdge:
    """Return the medial edge between two diagonal neighbours with its orientation."""
    h, other = (m1, m2) if is_horizontal(m1) else (m2, m1)
    off = (other[0] - h[0], other[1] - h[1])
    if off in ((1, 1), (-1, -1)):
        return (other, h)
    return (h, other)


def rot_cw(d: Point) -> Point:
    return (d[1], -d[0])


def rot_ccw(d: Point) -> Point:
    return (-d[1], d[0])


@dataclass(frozen=True)
class MedialGraph:
    """Medial vertices, oriented medial edges and the primal-edge association.

    For a Dobrushin domain, `interior` holds the midpoints of edges not on the
    wired arc (ba) and the graph keeps every medial edge touching it.
    """
    vertices: FrozenSet[MedialVertex]
    edges: Tuple[MedialEdge, ...]
    primal_index: Dict[MedialVertex, int]
    interior: FrozenSet[MedialVertex]
    wired_edges: FrozenSet[int]
    edge_set: FrozenSet[MedialEdge]
    e_a: Optional[MedialEdge] = None
    e_b: Optional[MedialEdge] = None
    a: Optional[Point] = None
    b: Optional[Point] = None

    def degree(self, m: MedialVertex) -> int:
        return sum(1 for d in DIAGONALS if orient(m, (m[0] + d[0], m[1] + d[1])) in self.edge_set)

    def has_edge(self, e: MedialEdge) -> bool:
        return e in self.edge_set

    def contour(self) -> List[MedialEdge]:
        """Edges with exactly one endpoint in the interior set."""
        return [e for e in self.edges if (e[0] in self.interior) != (e[1] in self.interior)]


def _edges_touching(points: FrozenSet[MedialVertex], both: bool) -> List[MedialEdge]:
    out = set()
    for m in points:
        for dx, dy in DIAGONALS:
            n = (m[0] + dx, m[1] + dy)
            if both and n not in points:
                continue
            out.add(orient(m, n))
    return sorted(out)


def medial_graph(domain: Domain, dobrushin: Optional[Tuple[Point, Point]] = None) -> MedialGraph:
    key = ("medial", dobrushin)
    cached = domain._medial_cache.get(key)
    if cached is not None:
        return cached

    primal_index = {midpoint(*e): k for k, e in enumerate(domain.edges)}
    if dobrushin is None:
        vertices = frozenset(primal_index)
        edges = _edges_touching(vertices, both=True)
        graph = MedialGraph(vertices=vertices, edges=tuple(edges), primal_index=primal_index,
                            interior=vertices, wired_edges=frozenset(), edge_set=frozenset(edges))
    else:
        a, b = dobrushin
        for name, v in (("a", a), ("b", b)):
            if not domain.on_boundary(v):
                raise InvalidMarks(f"mark {name}={v} is not on the boundary")
        wired = frozenset(domain.arc_edges(b, a)) if a != b else frozenset()
        interior = frozenset(m for m, k in primal_index.items() if k not in wired)
        edges = _edges_touching(interior, both=False)
        vertices = frozenset(v for e in edges for v in e)
        e_a, e_b = _marked_edges(domain, a, b)
        if e_a[0] in interior or e_b[1] in interior:
            raise InvalidMarks(f"marks a={a}, b={b} sit at concave boundary corners")
        graph = MedialGraph(vertices=vertices, edges=tuple(edges), primal_index=primal_index,
                            interior=interior, wired_edges=wired, edge_set=frozenset(edges), e_a=e_a, e_b=e_b, a=a, b=b)
        logger.debug(f"[medial] built Dobrushin medial graph: {len(interior)} interior vertices, "
                     f"{len(edges)} edges")
    domain._medial_cache[key] = graph
    return graph


def _marked_edges(domain: Domain, a: Point, b: Point) -> Tuple[MedialEdge, MedialEdge]:
    """Entry edge e_a (ending at the first free-arc edge) and exit edge e_b."""
    n = len(domain.boundary)
    a_next = domain.boundary[(domain.loop_position[a] + 1) % n]
    b_prev = domain.boundary[(domain.loop_position[b] - 1) % n]
    d_plus = (a_next[0] - a[0], a_next[1] - a[1])
    d_minus = (b_prev[0] - b[0], b_prev[1] - b[1])
    out_a = rot_cw(d_plus)
    out_b = rot_ccw(d_minus)
    e_a = (midpoint(a, (a[0] + out_a[0], a[1] + out_a[1])), midpoint(a, a_next))
    e_b = (midpoint(b, b_prev), midpoint(b, (b[0] + out_b[0], b[1] + out_b[1])))
    for e in (e_a, e_b):
        if orient(*e) != e:
            raise InvalidMarks(f"marked medial edge {e} has the wrong orientation")
    return e_a, e_b


def primal_edge_index(domain: Domain, m: MedialVertex) -> int:
    """Index of the primal edge under m, or -1 when it lies outside the domain."""
    return domain.edge_index.get(canonical_edge(*primal_edge(m)), -1)
