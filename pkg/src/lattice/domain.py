"""
Discrete domains of the square lattice.

A domain is the subgraph of Z^2 enclosed by a simple boundary loop, loop edges
included. Edges are kept in canonical order (sorted by smaller endpoint, then
larger endpoint); that order fixes bit positions everywhere else.
"""
from __future__ import annotations

import logging
from collections import defaultdict
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, FrozenSet, Iterable, List, Sequence, Tuple

import numpy as np

from src.errors import InvalidLoop, InvalidMarks, InvalidParams, InvalidQuad

logger = logging.getLogger(__name__)

Point = Tuple[int, int]
Edge = Tuple[Point, Point]
Face = Tuple[int, int]  # lower-left corner of a unit face

MASKS = ("full", "half", "quarter")


def canonical_edge(u: Point, w: Point) -> Edge:
    return (u, w) if u <= w else (w, u)


def linf(u: Point, w: Point) -> int:
    return max(abs(u[0] - w[0]), abs(u[1] - w[1]))


def face_sides(face: Face) -> Tuple[Edge, Edge, Edge, Edge]:
    i, j = face
    return (
        ((i, j), (i + 1, j)),
        ((i + 1, j), (i + 1, j + 1)),
        ((i, j + 1), (i + 1, j + 1)),
        ((i, j), (i, j + 1)),
    )


def face_corners(face: Face) -> Tuple[Point, Point, Point, Point]:
    i, j = face
    return ((i, j), (i + 1, j), (i + 1, j + 1), (i, j + 1))


def signed_area2(points: Sequence[Point]) -> int:
    """Twice the signed (shoelace) area of a closed polygon."""
    total = 0
    n = len(points)
    for k in range(n):
        x0, y0 = points[k]
        x1, y1 = points[(k + 1) % n]
        total += x0 * y1 - x1 * y0
    return total


@dataclass(frozen=True)
class BoundaryLoop:
    """Simple counterclockwise loop of unit steps."""
    vertices: Tuple[Point, ...]

    @classmethod
    def from_points(cls, points: Iterable[Sequence[int]]) -> "BoundaryLoop":
        pts = [(int(p[0]), int(p[1])) for p in points]
        if len(pts) > 1 and pts[0] == pts[-1]:
            pts = pts[:-1]
        if len(pts) < 4:
            raise InvalidLoop(f"a loop needs at least 4 vertices, got {len(pts)}")
        if len(set(pts)) != len(pts):
            raise InvalidLoop("loop revisits a vertex")
        for k, p in enumerate(pts):
            q = pts[(k + 1) % len(pts)]
            if abs(p[0] - q[0]) + abs(p[1] - q[1]) != 1:
                raise InvalidLoop(f"non-unit step {p} -> {q}")
        area2 = signed_area2(pts)
        if area2 == 0:
            raise InvalidLoop("loop encloses no area")
        if area2 < 0:
            logger.debug("[domain] clockwise loop reversed")
            pts = [pts[0]] + pts[:0:-1]
        return cls(tuple(pts))

    def __len__(self) -> int:
        return len(self.vertices)

    def edges(self) -> List[Edge]:
        n = len(self.vertices)
        return [canonical_edge(self.vertices[k], self.vertices[(k + 1) % n]) for k in range(n)]

    def canonical_shift(self) -> Tuple[Point, ...]:
        k = self.vertices.index(min(self.vertices))
        return self.vertices[k:] + self.vertices[:k]


def rect_loop(x0: int, y0: int, x1: int, y1: int) -> BoundaryLoop:
    """Counterclockwise boundary of [x0,x1] x [y0,y1], starting at (x0,y0)."""
    if x1 <= x0 or y1 <= y0:
        raise InvalidParams(f"degenerate rectangle [{x0},{x1}]x[{y0},{y1}]")
    pts: List[Point] = []
    pts += [(x, y0) for x in range(x0, x1)]
    pts += [(x1, y) for y in range(y0, y1)]
    pts += [(x, y1) for x in range(x1, x0, -1)]
    pts += [(x0, y) for y in range(y1, y0, -1)]
    return BoundaryLoop(tuple(pts))


def interior_faces(loop: BoundaryLoop) -> FrozenSet[Face]:
    """Faces enclosed by the loop (ray-cast parity along each row)."""
    rows: Dict[int, List[int]] = defaultdict(list)
    verts = loop.vertices
    n = len(verts)
    for k in range(n):
        (x0, y0), (x1, y1) = verts[k], verts[(k + 1) % n]
        if x0 == x1:
            rows[min(y0, y1)].append(x0)
    faces = set()
    for j, xs in rows.items():
        xs.sort()
        for left, right in zip(xs[0::2], xs[1::2]):
            faces.update((i, j) for i in range(left, right))
    return frozenset(faces)


def loop_from_faces(faces: Iterable[Face]) -> BoundaryLoop:
    """Boundary loop of a simply connected union of unit faces."""
    face_set = set(faces)
    if not face_set:
        raise InvalidLoop("empty face set")
    directed = set()
    for f in face_set:
        c = face_corners(f)
        for k in range(4):
            directed.add((c[k], c[(k + 1) % 4]))
    outgoing: Dict[Point, Point] = {}
    for u, w in directed:
        if (w, u) in directed:
            continue
        if u in outgoing:
            raise InvalidLoop(f"face set pinches at {u}")
        outgoing[u] = w
    start = min(outgoing)
    pts = [start]
    cur = outgoing[start]
    while cur != start:
        pts.append(cur)
        cur = outgoing[cur]
        if len(pts) > len(outgoing):
            raise InvalidLoop("boundary does not close")
    if len(pts) != len(outgoing):
        raise InvalidLoop("face set is not simply connected")
    return BoundaryLoop.from_points(pts)


class Domain:
    """Immutable simply connected lattice domain with its dual graph."""

    def __init__(self, loop: BoundaryLoop):
        self.loop = loop
        self.faces: Tuple[Face, ...] = tuple(sorted(interior_faces(loop)))
        if not self.faces:
            raise InvalidLoop("loop encloses no face")

        vertex_set = set(loop.vertices)
        edge_set = set(loop.edges())
        for f in self.faces:
            vertex_set.update(face_corners(f))
            edge_set.update(face_sides(f))

        self.vertices: Tuple[Point, ...] = tuple(sorted(vertex_set))
        self.edges: Tuple[Edge, ...] = tuple(sorted(edge_set))
        self.boundary: Tuple[Point, ...] = loop.vertices
        self.vertex_index: Dict[Point, int] = {v: i for i, v in enumerate(self.vertices)}
        self.edge_index: Dict[Edge, int] = {e: i for i, e in enumerate(self.edges)}
        self.loop_position: Dict[Point, int] = {v: k for k, v in enumerate(loop.vertices)}
        self.loop_edge_set: FrozenSet[Edge] = frozenset(loop.edges())

        vi = self.vertex_index
        self.coords = np.array(self.vertices, dtype=np.int64)
        self.edge_u = np.array([vi[e[0]] for e in self.edges], dtype=np.int64)
        self.edge_v = np.array([vi[e[1]] for e in self.edges], dtype=np.int64)
        self.boundary_index = np.array([vi[v] for v in self.boundary], dtype=np.int64)

        adjacency: List[List[Tuple[int, int]]] = [[] for _ in self.vertices]
        for k, (u, v) in enumerate(zip(self.edge_u.tolist(), self.edge_v.tolist())):
            adjacency[u].append((v, k))
            adjacency[v].append((u, k))
        self.adjacency = adjacency

        # dual graph: interior faces plus one exterior vertex
        self.face_index: Dict[Face, int] = {f: i for i, f in enumerate(self.faces)}
        self.exterior = len(self.faces)
        dual_a, dual_b = [], []
        for (x, y), (x2, y2) in self.edges:
            if y == y2:
                sides = ((x, y - 1), (x, y))
            else:
                sides = ((x - 1, y), (x, y))
            dual_a.append(self.face_index.get(sides[0], self.exterior))
            dual_b.append(self.face_index.get(sides[1], self.exterior))
        self.dual_a = np.array(dual_a, dtype=np.int64)
        self.dual_b = np.array(dual_b, dtype=np.int64)

        self._medial_cache: Dict[object, object] = {}

    @property
    def n_vertices(self) -> int:
        return len(self.vertices)

    @property
    def n_edges(self) -> int:
        return len(self.edges)

    def has_vertex(self, v: Point) -> bool:
        return v in self.vertex_index

    def has_edge(self, u: Point, w: Point) -> bool:
        return canonical_edge(u, w) in self.edge_index

    def on_boundary(self, v: Point) -> bool:
        return v in self.loop_position

    def arc(self, start: Point, end: Point, full_if_equal: bool = False) -> List[Point]:
        """Loop vertices from start counterclockwise to end, both included."""
        if start not in self.loop_position or end not in self.loop_position:
            raise InvalidMarks(f"arc endpoints {start}, {end} not on the boundary")
        n = len(self.boundary)
        i = self.loop_position[start]
        j = self.loop_position[end]
        length = (j - i) % n
        if length == 0 and full_if_equal:
            return [self.boundary[(i + k) % n] for k in range(n)]
        return [self.boundary[(i + k) % n] for k in range(length + 1)]

    def arc_edges(self, start: Point, end: Point, full_if_equal: bool = False) -> List[int]:
        """Indices of loop edges along the counterclockwise arc start -> end."""
        pts = self.arc(start, end, full_if_equal)
        if full_if_equal and start == end:
            pts = pts + [pts[0]]
        return [self.edge_index[canonical_edge(pts[k], pts[k + 1])] for k in range(len(pts) - 1)]

    def __repr__(self) -> str:
        return f"Domain(|V|={self.n_vertices}, |E|={self.n_edges}, |dD|={len(self.boundary)})"


def build_domain(loop: BoundaryLoop | Iterable[Sequence[int]]) -> Domain:
    if not isinstance(loop, BoundaryLoop):
        loop = BoundaryLoop.from_points(loop)
    return Domain(loop)


def extract_boundary_loop(domain: Domain) -> BoundaryLoop:
    """Re-derive the boundary loop from the edge set alone."""
    edges = set(domain.edges)
    candidates = {(min(u[0], w[0]), min(u[1], w[1])) for u, w in edges}
    faces = [f for f in candidates if all(s in edges for s in face_sides(f))]
    return loop_from_faces(faces)


def box_points(center: Point, n: int) -> List[Point]:
    cx, cy = center
    return [(x, y) for x in range(cx - n, cx + n + 1) for y in range(cy - n, cy + n + 1)]


def box_edges(center: Point, n: int) -> List[Edge]:
    cx, cy = center
    out = []
    for x in range(cx - n, cx + n + 1):
        for y in range(cy - n, cy + n + 1):
            if x < cx + n:
                out.append(((x, y), (x + 1, y)))
            if y < cy + n:
                out.append(((x, y), (x, y + 1)))
    return out


def contains_box(domain: Domain, center: Point, n: int) -> bool:
    if not all(domain.has_vertex(v) for v in box_points(center, n)):
        return False
    return all(e in domain.edge_index for e in box_edges(center, n))


def is_r_centred(domain: Domain, R: int) -> bool:
    """True iff the domain contains the box of radius 2R but not the one of radius 3R."""
    if R < 1:
        raise InvalidParams(f"R must be >= 1, got {R}")
    return contains_box(domain, (0, 0), 2 * R) and not contains_box(domain, (0, 0), 3 * R)


@dataclass(frozen=True)
class Quad:
    """Domain with four boundary marks in counterclockwise order."""
    domain: Domain
    a: Point
    b: Point
    c: Point
    d: Point

    def __post_init__(self):
        marks = (self.a, self.b, self.c, self.d)
        if len(set(marks)) != 4:
            raise InvalidQuad(f"quad marks must be distinct: {marks}")
        pos = self.domain.loop_position
        for m in marks:
            if m not in pos:
                raise InvalidQuad(f"mark {m} is not on the boundary")
        n = len(self.domain.boundary)
        base = pos[self.a]
        offsets = [(pos[m] - base) % n for m in marks]
        if offsets != sorted(offsets):
            raise InvalidQuad(f"marks {marks} are not in counterclockwise order")

    @property
    def marks(self) -> Tuple[Point, Point, Point, Point]:
        return (self.a, self.b, self.c, self.d)

    def arc(self, name: str) -> List[Point]:
        ends = {"ab": (self.a, self.b), "bc": (self.b, self.c),
                "cd": (self.c, self.d), "da": (self.d, self.a)}
        if name not in ends:
            raise InvalidParams(f"unknown arc {name!r}")
        return self.domain.arc(*ends[name])

    def rotated(self) -> "Quad":
        """Same domain, marks shifted so (ab),(cd) become (bc),(da)."""
        return Quad(self.domain, self.b, self.c, self.d, self.a)


@dataclass(frozen=True)
class Annulus:
    """Lambda_R(x) minus the open box of radius r, optionally masked."""
    center: Point
    r: int
    R: int
    mask: str = "full"

    def __post_init__(self):
        if self.r < 0 or self.R <= self.r:
            raise InvalidParams(f"annulus needs 0 <= r < R, got r={self.r}, R={self.R}")
        if self.mask not in MASKS:
            raise InvalidParams(f"mask must be one of {MASKS}, got {self.mask!r}")

    def in_mask(self, v: Point) -> bool:
        dx, dy = v[0] - self.center[0], v[1] - self.center[1]
        if self.mask == "half":
            return dy >= 0
        if self.mask == "quarter":
            return dx >= 0 and dy >= 0
        return True

    def norm(self, v: Point) -> int:
        return linf(v, self.center)

    def contains(self, v: Point) -> bool:
        return self.r <= self.norm(v) <= self.R and self.in_mask(v)

    def points(self) -> List[Point]:
        return [v for v in box_points(self.center, self.R) if self.contains(v)]


def parse_domain_text(text: str) -> Tuple[Domain, List[Point]]:
    """Parse `LOOP n` + n coordinate lines, then optional `MARK x y` lines."""
    lines = [ln.strip() for ln in text.splitlines()]
    lines = [ln for ln in lines if ln and not ln.startswith("#")]
    if not lines or not lines[0].upper().startswith("LOOP"):
        raise InvalidLoop("domain file must start with 'LOOP n'")
    try:
        n = int(lines[0].split()[1])
        pts = [tuple(int(t) for t in ln.split()[:2]) for ln in lines[1:1 + n]]
        marks = []
        for ln in lines[1 + n:]:
            parts = ln.split()
            if parts[0].upper() != "MARK":
                raise InvalidParams(f"unexpected line {ln!r}")
            marks.append((int(parts[1]), int(parts[2])))
    except (IndexError, ValueError) as e:
        raise InvalidLoop(f"malformed domain file: {e}") from e
    if len(pts) != n:
        raise InvalidLoop(f"expected {n} loop points, found {len(pts)}")
    return build_domain(pts), marks


def read_domain_file(path: Path | str) -> Tuple[Domain, List[Point]]:
    return parse_domain_text(Path(path).read_text(encoding="utf-8-sig"))


def read_quad_file(path: Path | str) -> Quad:
    domain, marks = read_domain_file(path)
    if len(marks) != 4:
        raise InvalidQuad(f"quad file needs 4 MARK lines, found {len(marks)}")
    return Quad(domain, *marks)


def format_domain(domain: Domain, marks: Sequence[Point] = ()) -> str:
    out = [f"LOOP {len(domain.boundary)}"]
    out += [f"{x} {y}" for x, y in domain.boundary]
    out += [f"MARK {x} {y}" for x, y in marks]
    return "\n".join(out) + "\n"


def write_domain_file(path: Path | str, domain: Domain, marks: Sequence[Point] = ()) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(format_domain(domain, marks), encoding="utf-8")
