"""
Arm events in annuli.

An arm of type 1 is an open primal path, an arm of type 0 a dual path of
faces crossing closed edges. Arms run from the inner box boundary to the
outer one inside the (masked) annulus; arms of one type are vertex-disjoint
(face-disjoint for dual arms). Edges lying on either box boundary are not
part of the annulus graph, so primal and dual crossings alternate around it.

Inner ports are walked counterclockwise from (center + (r, 0)): boundary
vertices alternate with the faces sitting on the outside of each boundary
edge. Faces touching the inner box at a corner only are not ports.

The detector works on crossing clusters: primal and dual clusters joining
the two boundaries alternate around the annulus, each has a capacity (its
number of disjoint crossings, by node connectivity), and a sequence sigma
is realised iff its runs of equal letters can be packed, in order, onto
the clusters. An exhaustive port-tuple search with max-flow serves as the
reference oracle.
"""
from __future__ import annotations

import itertools
import logging
import math
from collections import deque
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Dict, FrozenSet, List, Optional, Sequence, Tuple, Union

import networkx as nx
import numpy as np
from networkx.algorithms.connectivity import local_node_connectivity
from scipy import sparse
from scipy.sparse import csgraph

from src.errors import BelowMinimalRadius, CapExceeded, InvalidIntervals, InvalidParams, OutOfDomain
from src.lattice.domain import MASKS, Annulus, Domain, Face, Point, face_corners, linf
from src.lattice.medial import rot_cw
from src.model.connectivity import reach_matrix
from src.model.measure import Configuration

logger = logging.getLogger(__name__)

PRIMAL, DUAL = 1, 0
MAX_PORT_TUPLES = 200_000
Interval = Tuple[float, float]
NAMED_INTERVALS: Dict[str, Interval] = {
    "right": (7.0, 1.0),
    "top": (1.0, 3.0),
    "left": (3.0, 5.0),
    "bottom": (5.0, 7.0),
    "full": (0.0, 8.0),
}
Port = Tuple[int, int]  # (type, vertex index or face index)


def _interval(value: Union[str, Sequence[float]]) -> Interval:
    if isinstance(value, str):
        if value not in NAMED_INTERVALS:
            raise InvalidIntervals(f"unknown interval {value!r}")
        return NAMED_INTERVALS[value]
    s, e = float(value[0]), float(value[1])
    if not (0.0 <= s < 8.0 and 0.0 < e <= 8.0) or s == e:
        raise InvalidIntervals(f"interval ({s}, {e}) must lie in [0, 8)")
    return s, e


@dataclass(frozen=True)
class ArmSpec:
    """Arm sequence with its optional defect budget, separation and landing intervals.

    Intervals are arcs of the boundary of [-1, 1]^2, parametrised by
    t in [0, 8) counterclockwise from (1, 0); (s, e) with s > e wraps.
    """
    sigma: Tuple[int, ...]
    mask: str = "full"
    defects: int = 0
    delta: float = 0.0
    inner: Optional[Tuple[Interval, ...]] = None
    outer: Optional[Tuple[Interval, ...]] = None

    def __post_init__(self):
        sigma = tuple(int(c) for c in self.sigma)
        if not sigma or any(c not in (0, 1) for c in sigma):
            raise InvalidParams(f"sigma must be a non-empty 0/1 sequence, got {self.sigma!r}")
        object.__setattr__(self, "sigma", sigma)
        if self.mask not in MASKS:
            raise InvalidParams(f"mask must be one of {MASKS}, got {self.mask!r}")
        if self.defects < 0:
            raise InvalidParams("defect budget must be >= 0")
        if self.defects and sigma != (PRIMAL,):
            raise InvalidParams("defect budgets are only supported for a single primal arm")
        if self.delta < 0:
            raise InvalidParams("delta must be >= 0")
        for name in ("inner", "outer"):
            value = getattr(self, name)
            if value is not None:
                intervals = tuple(_interval(v) for v in value)
                if len(intervals) != len(sigma):
                    raise InvalidIntervals(f"{name} needs {len(sigma)} intervals, got {len(intervals)}")
                _check_disjoint(intervals)
                object.__setattr__(self, name, intervals)

    @classmethod
    def parse(cls, sigma: Union[str, Sequence[int]], **kwargs) -> "ArmSpec":
        if isinstance(sigma, str):
            sigma = tuple(int(c) for c in sigma if c in "01")
        return cls(sigma=tuple(sigma), **kwargs)

    @property
    def k(self) -> int:
        return len(self.sigma)

    @property
    def label(self) -> str:
        return "".join(str(c) for c in self.sigma)


def _segments(iv: Interval) -> List[Interval]:
    s, e = iv
    return [(s, e)] if s < e else [(s, 8.0), (0.0, e)]


def _check_disjoint(intervals: Sequence[Interval]) -> None:
    if len(intervals) == 1:
        return
    for (i, a), (j, b) in itertools.combinations(enumerate(intervals), 2):
        for s1, e1 in _segments(a):
            for s2, e2 in _segments(b):
                if s1 < e2 and s2 < e1:
                    raise InvalidIntervals(f"intervals {i} and {j} overlap")
    starts = [iv[0] for iv in intervals]
    first = starts.index(min(starts))
    rotated = starts[first:] + starts[:first]
    if rotated != sorted(rotated):
        raise InvalidIntervals("intervals are not in counterclockwise order")


def _in_interval(t: float, iv: Interval) -> bool:
    return any(s <= t < e for s, e in _segments(iv))


def ring_parameter(p: Tuple[float, float], center: Point) -> float:
    """Position in [0, 8) of p projected onto the boundary of the unit L-inf box."""
    x, y = p[0] - center[0], p[1] - center[1]
    n = max(abs(x), abs(y))
    if n == 0:
        return 0.0
    x, y = x / n, y / n
    if x >= 1.0 and y >= 0.0:
        return y
    if y >= 1.0:
        return 1.0 + (1.0 - x)
    if x <= -1.0:
        return 3.0 + (1.0 - y)
    if y <= -1.0:
        return 5.0 + (x + 1.0)
    return 7.0 + (y + 1.0)


def _ring_points(center: Point, r: int, mask: str) -> Tuple[List[Point], bool]:
    """Vertices of the inner box boundary counterclockwise from (r, 0), and whether the walk is cyclic."""
    cx, cy = center
    if r == 0:
        return [center], False
    legs = {
        "full": [((0, 1), r), ((-1, 0), 2 * r), ((0, -1), 2 * r), ((1, 0), 2 * r), ((0, 1), r - 1)],
        "half": [((0, 1), r), ((-1, 0), 2 * r), ((0, -1), r)],
        "quarter": [((0, 1), r), ((-1, 0), r)],
    }[mask]
    x, y = cx + r, cy
    pts = [(x, y)]
    for (dx, dy), n in legs:
        for _ in range(n):
            x, y = x + dx, y + dy
            pts.append((x, y))
    return pts, mask == "full"


def _outside_face(v: Point, w: Point) -> Face:
    n = rot_cw((w[0] - v[0], w[1] - v[1]))
    xs = (v[0], w[0], v[0] + n[0], w[0] + n[0])
    ys = (v[1], w[1], v[1] + n[1], w[1] + n[1])
    return min(xs), min(ys)


def _face_center(f: Face) -> Tuple[float, float]:
    return f[0] + 0.5, f[1] + 0.5


@dataclass
class AnnulusGeometry:
    """Primal and dual graphs of a masked annulus inside a domain."""
    domain: Domain
    annulus: Annulus
    vertices: List[int]
    edges: List[int]
    faces: List[Face]
    face_links: List[Tuple[int, int, int]]
    ring: List[Port]
    cyclic: bool
    inner_vertices: FrozenSet[int]
    outer_vertices: FrozenSet[int]
    inner_faces: FrozenSet[int]
    outer_faces: FrozenSet[int]
    outer_ring: List[Port] = field(default_factory=list)

    def position(self, port: Port) -> Tuple[float, float]:
        kind, key = port
        if kind == PRIMAL:
            return tuple(float(c) for c in self.domain.vertices[key])
        return _face_center(self.faces[key])


def annulus_geometry(domain: Domain, annulus: Annulus) -> AnnulusGeometry:
    key = ("annulus", annulus)
    cached = domain._medial_cache.get(key)
    if cached is not None:
        return cached

    c, r, R = annulus.center, annulus.r, annulus.R
    vi = domain.vertex_index

    def inside(v: Point) -> bool:
        return r <= linf(v, c) <= R and annulus.in_mask(v)

    pts = [v for v in domain.vertices if inside(v)]
    for x in range(c[0] - R, c[0] + R + 1):
        for y in range(c[1] - R, c[1] + R + 1):
            if inside((x, y)) and (x, y) not in vi:
                raise OutOfDomain(f"annulus vertex {(x, y)} is outside the domain")
    vertices = [vi[v] for v in pts]
    vset = set(vertices)
    edges = []
    for k, (u, w) in enumerate(domain.edges):
        if vi[u] not in vset or vi[w] not in vset:
            continue
        nu, nw = linf(u, c), linf(w, c)
        if nu == nw and nu in (r, R):
            continue
        edges.append(k)
    for v in pts:
        for d in ((1, 0), (0, 1)):
            w = (v[0] + d[0], v[1] + d[1])
            if inside(w) and not (linf(v, c) == linf(w, c) and linf(v, c) in (r, R)) \
                    and not domain.has_edge(v, w):
                raise OutOfDomain(f"annulus edge {v}-{w} is outside the domain")

    faces = sorted(f for f in {(x, y) for x in range(c[0] - R, c[0] + R) for y in range(c[1] - R, c[1] + R)}
                   if all(inside(p) for p in face_corners(f)))
    findex = {f: i for i, f in enumerate(faces)}
    links = []
    for f, i in findex.items():
        for g, u, w in (((f[0] + 1, f[1]), (f[0] + 1, f[1]), (f[0] + 1, f[1] + 1)),
                        ((f[0], f[1] + 1), (f[0], f[1] + 1), (f[0] + 1, f[1] + 1))):
            j = findex.get(g)
            if j is not None:
                links.append((i, j, domain.edge_index[(u, w)]))

    def side_face(f: Face, radius: int) -> bool:
        return sum(1 for p in face_corners(f) if linf(p, c) == radius) >= 2

    inner_faces = frozenset(i for f, i in findex.items() if side_face(f, r))
    outer_faces = frozenset(i for f, i in findex.items() if side_face(f, R))

    ring = _port_ring(domain, c, r, annulus.mask, findex)
    outer_ring = _port_ring(domain, c, R, annulus.mask, findex, outer=True)
    geo = AnnulusGeometry(
        domain=domain, annulus=annulus, vertices=vertices, edges=edges, faces=faces, face_links=links,
        ring=ring, cyclic=annulus.mask == "full",
        inner_vertices=frozenset(vi[v] for v in pts if linf(v, c) == r),
        outer_vertices=frozenset(vi[v] for v in pts if linf(v, c) == R),
        inner_faces=inner_faces, outer_faces=outer_faces, outer_ring=outer_ring,
    )
    domain._medial_cache[key] = geo
    return geo


def _port_ring(domain: Domain, center: Point, radius: int, mask: str, findex: Dict[Face, int],
               outer: bool = False) -> List[Port]:
    pts, cyclic = _ring_points(center, radius, mask)
    ring: List[Port] = []
    steps = len(pts) if cyclic else len(pts) - 1
    for k in range(len(pts)):
        ring.append((PRIMAL, domain.vertex_index[pts[k]]))
        if k < steps:
            v, w = pts[k], pts[(k + 1) % len(pts)]
            f = _outside_face(w, v) if outer else _outside_face(v, w)
            if f in findex:
                ring.append((DUAL, findex[f]))
    return ring


def _ring_types(center: Point, r: int, mask: str) -> Tuple[Tuple[int, ...], bool]:
    if r == 0:
        return (PRIMAL,), False
    pts, cyclic = _ring_points(center, r, mask)
    n_faces = len(pts) if cyclic else len(pts) - 1
    types = []
    for k in range(len(pts)):
        types.append(PRIMAL)
        if k < n_faces:
            types.append(DUAL)
    return tuple(types), cyclic


def _subsequence(pattern: Sequence[int], seq: Sequence[int]) -> bool:
    it = iter(seq)
    return all(any(x == p for x in it) for p in pattern)


def _rotations(seq: Sequence[int]) -> List[Tuple[int, ...]]:
    return [tuple(seq[i:]) + tuple(seq[:i]) for i in range(len(seq))]


@lru_cache(maxsize=None)
def minimal_radius(sigma: Tuple[int, ...], mask: str = "full") -> int:
    """Smallest inner radius whose port ring can host sigma in order."""
    if len(sigma) == 1:
        return 0
    for r in itertools.count(1):
        types, cyclic = _ring_types((0, 0), r, mask)
        if cyclic:
            ok = any(_subsequence(rot, ring) for rot in _rotations(sigma) for ring in _rotations(types))
        else:
            ok = _subsequence(sigma, types)
        if ok:
            logger.debug(f"[arms] r_sigma({''.join(map(str, sigma))}, {mask}) = {r}")
            return r
    raise AssertionError("unreachable")


def _effective(annulus: Annulus, spec: ArmSpec) -> Annulus:
    if spec.mask != "full" and annulus.mask != spec.mask:
        return Annulus(annulus.center, annulus.r, annulus.R, spec.mask)
    return annulus


def _check_radius(annulus: Annulus, spec: ArmSpec) -> None:
    r_min = minimal_radius(spec.sigma, annulus.mask)
    if annulus.r < r_min:
        raise BelowMinimalRadius(f"sigma={spec.label} needs r >= {r_min}, got r={annulus.r}")


def _labels(n: int, us: Sequence[int], vs: Sequence[int]) -> np.ndarray:
    graph = sparse.coo_matrix((np.ones(len(us), dtype=np.int8), (list(us), list(vs))), shape=(n, n))
    return csgraph.connected_components(graph, directed=False)[1]


@dataclass
class CrossingCluster:
    kind: int
    label: int
    members: List[int]


def crossing_clusters(config: Configuration, geo: AnnulusGeometry) -> Tuple[Dict[Port, Tuple[int, int]], List[CrossingCluster]]:
    """Clusters joining the two boundaries, keyed by port -> (type, label)."""
    dom = geo.domain
    bits = config.bits
    local = {v: i for i, v in enumerate(geo.vertices)}
    open_edges = [k for k in geo.edges if bits[k]]
    p_lab = _labels(len(geo.vertices), [local[int(dom.edge_u[k])] for k in open_edges],
                    [local[int(dom.edge_v[k])] for k in open_edges])
    closed_links = [(i, j) for i, j, k in geo.face_links if not bits[k]]
    d_lab = _labels(len(geo.faces), [i for i, _ in closed_links], [j for _, j in closed_links])

    out: List[CrossingCluster] = []
    tags: Dict[Port, Tuple[int, int]] = {}
    p_inner = {int(p_lab[local[v]]) for v in geo.inner_vertices}
    p_outer = {int(p_lab[local[v]]) for v in geo.outer_vertices}
    for lab in sorted(p_inner & p_outer):
        members = [geo.vertices[i] for i in np.flatnonzero(p_lab == lab).tolist()]
        out.append(CrossingCluster(PRIMAL, lab, members))
        for v in members:
            tags[(PRIMAL, v)] = (PRIMAL, lab)
    d_inner = {int(d_lab[f]) for f in geo.inner_faces}
    d_outer = {int(d_lab[f]) for f in geo.outer_faces}
    for lab in sorted(d_inner & d_outer):
        members = np.flatnonzero(d_lab == lab).tolist()
        out.append(CrossingCluster(DUAL, lab, members))
        for f in members:
            tags[(DUAL, f)] = (DUAL, lab)
    return tags, out


def _cluster_capacity(config: Configuration, geo: AnnulusGeometry, cluster: CrossingCluster, cutoff: int) -> int:
    g = nx.Graph()
    members = set(cluster.members)
    if cluster.kind == PRIMAL:
        dom = geo.domain
        for k in geo.edges:
            u, v = int(dom.edge_u[k]), int(dom.edge_v[k])
            if config.bits[k] and u in members and v in members:
                g.add_edge(u, v)
        inner, outer = geo.inner_vertices, geo.outer_vertices
    else:
        for i, j, k in geo.face_links:
            if not config.bits[k] and i in members and j in members:
                g.add_edge(i, j)
        inner, outer = geo.inner_faces, geo.outer_faces
    g.add_nodes_from(members)
    g.add_edges_from(("S", x) for x in members & inner)
    g.add_edges_from((x, "T") for x in members & outer)
    return int(local_node_connectivity(g, "S", "T", cutoff=cutoff))


def crossing_sequence(config: Configuration, geo: AnnulusGeometry,
                      cutoff: int) -> Optional[List[Tuple[int, int]]]:
    """(type, capacity) of crossing clusters in ring order, or None when the order is ambiguous."""
    tags, found = crossing_clusters(config, geo)
    seq: List[Tuple[int, int]] = []
    for port in geo.ring:
        tag = tags.get(port)
        if tag is not None and (not seq or seq[-1] != tag):
            seq.append(tag)
    if geo.cyclic and len(seq) > 1 and seq[0] == seq[-1]:
        seq.pop()
    if len(set(seq)) != len(seq):
        logger.debug(f"[arms] ambiguous cluster order on {geo.annulus}")
        return None
    by_tag = {(c.kind, c.label): c for c in found}
    return [(tag[0], _cluster_capacity(config, geo, by_tag[tag], cutoff)) for tag in seq]


def _runs(sigma: Sequence[int], cyclic: bool) -> List[Tuple[int, int]]:
    sigma = list(sigma)
    if cyclic and len(set(sigma)) > 1:
        while sigma[0] == sigma[-1]:
            sigma = sigma[1:] + sigma[:1]
    runs: List[Tuple[int, int]] = []
    for c in sigma:
        if runs and runs[-1][0] == c:
            runs[-1] = (c, runs[-1][1] + 1)
        else:
            runs.append((c, 1))
    return runs


def _pack(runs: Sequence[Tuple[int, int]], seq: Sequence[Tuple[int, int]]) -> bool:
    i = 0
    for kind, length in runs:
        have = 0
        while have < length:
            if i >= len(seq):
                return False
            if seq[i][0] == kind:
                have += seq[i][1]
            i += 1
    return True


def sequence_realises(sigma: Sequence[int], seq: Sequence[Tuple[int, int]], cyclic: bool) -> bool:
    """Whether the runs of sigma pack onto the (type, capacity) cluster sequence."""
    if not seq:
        return False
    runs = _runs(sigma, cyclic)
    if len(runs) == 1:
        kind, length = runs[0]
        return sum(cap for t, cap in seq if t == kind) >= length
    if not cyclic:
        return _pack(runs, seq)
    return any(_pack(runs, rot) for rot in (list(seq[i:]) + list(seq[:i]) for i in range(len(seq))))


def detect_arms(config: Configuration, annulus: Annulus, spec: ArmSpec) -> bool:
    annulus = _effective(annulus, spec)
    _check_radius(annulus, spec)
    if spec.defects:
        return one_arm_with_defects(config, annulus, spec.defects)
    geo = annulus_geometry(config.domain, annulus)
    seq = crossing_sequence(config, geo, cutoff=spec.k)
    if seq is None:
        return arms_oracle(config, annulus, spec)
    return sequence_realises(spec.sigma, seq, geo.cyclic)


# --- exhaustive reference -------------------------------------------------

class _Flows:
    """Max-flow checks on node-split primal and dual annulus graphs."""

    def __init__(self, config: Configuration, geo: AnnulusGeometry):
        dom = geo.domain
        self.primal = [(int(dom.edge_u[k]), int(dom.edge_v[k])) for k in geo.edges if config.bits[k]]
        self.dual = [(i, j) for i, j, k in geo.face_links if not config.bits[k]]
        self.nodes = {PRIMAL: list(geo.vertices), DUAL: list(range(len(geo.faces)))}
        self._memo: Dict[Tuple, int] = {}

    def count(self, kind: int, sources: Sequence, targets: Sequence, groups: bool = False) -> int:
        """Vertex-disjoint paths from sources to targets.

        With groups=True, sources and targets are sequences of port sets and
        each set may be used by at most one path.
        """
        key = (kind, tuple(map(tuple, sources)) if groups else tuple(sorted(sources)),
               tuple(map(tuple, targets)) if groups else tuple(sorted(targets)), groups)
        if key in self._memo:
            return self._memo[key]
        g = nx.DiGraph()
        for n in self.nodes[kind]:
            g.add_edge((n, "in"), (n, "out"), capacity=1)
        for u, v in (self.primal if kind == PRIMAL else self.dual):
            g.add_edge((u, "out"), (v, "in"), capacity=1)
            g.add_edge((v, "out"), (u, "in"), capacity=1)
        if groups:
            for i, group in enumerate(sources):
                g.add_edge("S", ("I", i), capacity=1)
                for s in group:
                    g.add_edge(("I", i), (s, "in"), capacity=1)
            for j, group in enumerate(targets):
                g.add_edge(("J", j), "T", capacity=1)
                for t in group:
                    g.add_edge((t, "out"), ("J", j), capacity=1)
        else:
            for s in sources:
                g.add_edge("S", (s, "in"), capacity=1)
            for t in targets:
                g.add_edge((t, "out"), "T", capacity=1)
        value = int(nx.maximum_flow_value(g, "S", "T")) if sources and targets else 0
        self._memo[key] = value
        return value


def _type_matches(types: Sequence[int], sigma: Sequence[int], cyclic: bool) -> bool:
    if not cyclic:
        return tuple(types) == tuple(sigma)
    return tuple(types) in set(_rotations(sigma))


def _port_tuples(ring: Sequence[Port], sigma: Sequence[int], cyclic: bool) -> List[Tuple[Port, ...]]:
    total = math.comb(len(ring), len(sigma))
    if total > MAX_PORT_TUPLES:
        raise CapExceeded(required=total, cap=MAX_PORT_TUPLES,
                          message=f"{total} port tuples exceed the search cap {MAX_PORT_TUPLES}")
    return [combo for combo in itertools.combinations(ring, len(sigma))
            if _type_matches([p[0] for p in combo], sigma, cyclic)]


def arms_oracle(config: Configuration, annulus: Annulus, spec: ArmSpec) -> bool:
    """Exhaustive search over ordered inner port tuples with max-flow feasibility."""
    annulus = _effective(annulus, spec)
    geo = annulus_geometry(config.domain, annulus)
    flows = _Flows(config, geo)
    outer = {PRIMAL: sorted(geo.outer_vertices), DUAL: sorted(geo.outer_faces)}
    inner_ok = {PRIMAL: geo.inner_vertices, DUAL: geo.inner_faces}
    for combo in _port_tuples(geo.ring, spec.sigma, geo.cyclic):
        if not all(key in inner_ok[kind] for kind, key in combo):
            continue
        ok = True
        for kind in (PRIMAL, DUAL):
            chosen = [key for t, key in combo if t == kind]
            if chosen and flows.count(kind, chosen, outer[kind]) < len(chosen):
                ok = False
                break
        if ok:
            return True
    return False


# --- well-separated arms --------------------------------------------------

def _local_connection(config: Configuration, geo: AnnulusGeometry, port: Port, radius: int,
                      boundary: int, inward: bool) -> bool:
    """Port joined, by its own type, to distance `radius` from the box boundary inside its local box."""
    if radius <= 0:
        return True
    dom = geo.domain
    c = geo.annulus.center
    origin = geo.position(port)

    def near(p: Tuple[float, float]) -> bool:
        return max(abs(p[0] - origin[0]), abs(p[1] - origin[1])) <= radius

    def far_enough(p: Tuple[float, float]) -> bool:
        n = max(abs(p[0] - c[0]), abs(p[1] - c[1]))
        return (boundary - n >= radius) if inward else (n - boundary >= radius)

    kind, key = port
    if kind == PRIMAL:
        seen = {key}
        queue = deque([key])
        while queue:
            x = queue.popleft()
            if far_enough(dom.vertices[x]):
                return True
            for y, k in dom.adjacency[x]:
                if config.bits[k] and y not in seen and near(dom.vertices[y]):
                    seen.add(y)
                    queue.append(y)
        return False

    start = geo.faces[key]
    seen_f = {start}
    queue_f = deque([start])
    while queue_f:
        f = queue_f.popleft()
        if far_enough(_face_center(f)):
            return True
        i, j = f
        for g, u, w in (((i + 1, j), (i + 1, j), (i + 1, j + 1)), ((i - 1, j), (i, j), (i, j + 1)),
                        ((i, j + 1), (i, j + 1), (i + 1, j + 1)), ((i, j - 1), (i, j), (i + 1, j))):
            k = dom.edge_index.get((u, w))
            if k is None or config.bits[k] or g in seen_f or not near(_face_center(g)):
                continue
            if g not in dom.face_index:
                continue
            seen_f.add(g)
            queue_f.append(g)
    return False


def _spaced(positions: Sequence[Tuple[float, float]], gap: float) -> bool:
    return all(max(abs(p[0] - q[0]), abs(p[1] - q[1])) > gap for p, q in itertools.combinations(positions, 2))


def detect_well_separated(config: Configuration, annulus: Annulus, spec: ArmSpec) -> bool:
    """Arms realising sigma whose endpoints are spread out and locally extended."""
    if spec.delta == 0:
        return detect_arms(config, annulus, spec)
    annulus = _effective(annulus, spec)
    _check_radius(annulus, spec)
    if not detect_arms(config, annulus, spec):
        return False
    geo = annulus_geometry(config.domain, annulus)
    flows = _Flows(config, geo)
    r, R = annulus.r, annulus.R
    rad_in, rad_out = int(math.floor(spec.delta * r)), int(math.floor(spec.delta * R))
    inner_ok = {PRIMAL: geo.inner_vertices, DUAL: geo.inner_faces}
    outer_ok = {PRIMAL: geo.outer_vertices, DUAL: geo.outer_faces}

    inner_ports = [p for p in geo.ring if p[1] in inner_ok[p[0]]
                   and _local_connection(config, geo, p, rad_in, r, inward=True)]
    outer_ports = [p for p in geo.outer_ring if p[1] in outer_ok[p[0]]
                   and _local_connection(config, geo, p, rad_out, R, inward=False)]
    inner_tuples = [t for t in _port_tuples(inner_ports, spec.sigma, geo.cyclic)
                    if _spaced([geo.position(p) for p in t], 2 * spec.delta * r)]
    outer_tuples = [t for t in _port_tuples(outer_ports, spec.sigma, geo.cyclic)
                    if _spaced([geo.position(p) for p in t], 2 * spec.delta * R)]
    for inner in inner_tuples:
        for outer in outer_tuples:
            if all(flows.count(kind, [k for t, k in inner if t == kind], [k for t, k in outer if t == kind])
                   >= sum(1 for t, _ in inner if t == kind) for kind in (PRIMAL, DUAL)):
                return True
    return False


# --- localised arms -------------------------------------------------------

def detect_localized_arms(config: Configuration, annulus: Annulus, spec: ArmSpec) -> bool:
    """Arms realising sigma with arm i starting on r I_i and ending on R J_i.

    On the full annulus the assignment of arms to intervals is fixed up to
    a rotation of the whole family.
    """
    inner = spec.inner or (NAMED_INTERVALS["full"],) * spec.k
    outer = spec.outer or (NAMED_INTERVALS["full"],) * spec.k
    full = NAMED_INTERVALS["full"]
    if all(iv == full for iv in inner + outer):
        return detect_arms(config, annulus, spec)
    annulus = _effective(annulus, spec)
    _check_radius(annulus, spec)
    geo = annulus_geometry(config.domain, annulus)
    flows = _Flows(config, geo)
    c = annulus.center
    inner_ok = {PRIMAL: geo.inner_vertices, DUAL: geo.inner_faces}
    outer_ok = {PRIMAL: geo.outer_vertices, DUAL: geo.outer_faces}

    for kind in (PRIMAL, DUAL):
        arms = [i for i, t in enumerate(spec.sigma) if t == kind]
        if not arms:
            continue
        sources = [[key for t, key in geo.ring if t == kind and key in inner_ok[kind]
                    and _in_interval(ring_parameter(geo.position((t, key)), c), inner[i])] for i in arms]
        targets = [[key for t, key in geo.outer_ring if t == kind and key in outer_ok[kind]
                    and _in_interval(ring_parameter(geo.position((t, key)), c), outer[i])] for i in arms]
        if flows.count(kind, sources, targets, groups=True) < len(arms):
            return False
    return True


# --- single arm with defects ----------------------------------------------

def one_arm_with_defects(config: Configuration, annulus: Annulus, budget: int) -> bool:
    """Path from the inner to the outer boundary using at most `budget` closed edges (0/1-BFS)."""
    geo = annulus_geometry(config.domain, annulus)
    return min_defects(config, geo) <= budget


def min_defects(config: Configuration, geo: AnnulusGeometry) -> int:
    dom = geo.domain
    allowed = set(geo.vertices)
    dist = {v: 0 for v in geo.inner_vertices}
    queue = deque(geo.inner_vertices)
    best = math.inf
    while queue:
        x = queue.popleft()
        d = dist[x]
        if x in geo.outer_vertices:
            best = min(best, d)
            continue
        for y, k in dom.adjacency[x]:
            if y not in allowed:
                continue
            nd = d + (0 if config.bits[k] else 1)
            if nd < dist.get(y, math.inf):
                dist[y] = nd
                if nd == d:
                    queue.appendleft(y)
                else:
                    queue.append(y)
    return int(best) if best < math.inf else len(geo.edges) + 1


def one_arm_event(domain: Domain, annulus: Annulus):
    """Vectorised one-arm indicator over bit matrices."""
    geo = annulus_geometry(domain, annulus)
    allowed = np.zeros(domain.n_vertices, dtype=bool)
    allowed[geo.vertices] = True
    sources = sorted(geo.inner_vertices)
    targets = sorted(geo.outer_vertices)

    def event(bits: np.ndarray) -> np.ndarray:
        return reach_matrix(domain, bits, sources, allowed)[:, targets].any(axis=1)

    return event
