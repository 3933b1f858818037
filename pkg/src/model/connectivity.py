"""
Configuration geometry: clusters, crossings, circuits, boundary-touching
counts and interface traversals of annuli.

All distances are L-infinity. Functions here are pure in (configuration,
geometry) and safe to call from several worker threads at once.
"""
from __future__ import annotations

import logging
import math
from collections import deque
from dataclasses import dataclass, field
from typing import Callable, Dict, Iterable, List, Optional, Sequence, Set, Tuple

import numpy as np
from scipy import sparse
from scipy.sparse import csgraph

from src.errors import InvalidParams, NotCentred, OutOfDomain, SizeMismatch
from src.lattice.domain import Annulus, Domain, Point, Quad, box_points, contains_box, is_r_centred, linf
from src.lattice.medial import MedialEdge
from src.model.measure import BoundaryPartition, Configuration, cluster_labels
from src.model.parafermion import free_loops

logger = logging.getLogger(__name__)

ORIGIN: Point = (0, 0)


def _min_labels(n_comp: int, labels: np.ndarray) -> np.ndarray:
    """Relabel components by their smallest member index."""
    mins = np.full(n_comp, labels.size, dtype=np.int64)
    np.minimum.at(mins, labels, np.arange(labels.size, dtype=np.int64))
    return mins[labels]


@dataclass
class ClusterLabeling:
    """Primal labels per vertex and dual labels per face (exterior last).

    A label is the smallest index in its component.
    """
    domain: Domain
    primal: np.ndarray = field(repr=False)
    dual: np.ndarray = field(repr=False)
    sizes: Dict[int, int] = field(repr=False)
    boxes: Dict[int, Tuple[int, int, int, int]] = field(repr=False)

    @property
    def n_clusters(self) -> int:
        return len(self.sizes)

    @property
    def n_dual_clusters(self) -> int:
        return int(np.unique(self.dual).size)

    def label_of(self, v: Point) -> int:
        return int(self.primal[self.domain.vertex_index[v]])

    def connected(self, u: Point, v: Point) -> bool:
        return self.label_of(u) == self.label_of(v)

    def diameter(self, label: int) -> int:
        x0, y0, x1, y1 = self.boxes[label]
        return max(x1 - x0, y1 - y0)

    def members(self, label: int) -> np.ndarray:
        return np.flatnonzero(self.primal == label)


def clusters(config: Configuration, bc: Optional[BoundaryPartition] = None) -> ClusterLabeling:
    dom = config.domain
    bc = bc or BoundaryPartition.free(dom)
    n_comp, labels = cluster_labels(dom, config.bits, bc)
    primal = _min_labels(n_comp, labels)

    closed = ~config.bits
    n_dual = dom.exterior + 1
    graph = sparse.coo_matrix((np.ones(int(closed.sum()), dtype=np.int8),
                               (dom.dual_a[closed], dom.dual_b[closed])), shape=(n_dual, n_dual))
    d_comp, d_labels = csgraph.connected_components(graph, directed=False)
    dual = _min_labels(int(d_comp), d_labels)

    uniq, counts = np.unique(primal, return_counts=True)
    xs, ys = dom.coords[:, 0], dom.coords[:, 1]
    lo_x = np.full(dom.n_vertices, np.iinfo(np.int64).max, dtype=np.int64)
    lo_y = lo_x.copy()
    hi_x = np.full(dom.n_vertices, np.iinfo(np.int64).min, dtype=np.int64)
    hi_y = hi_x.copy()
    np.minimum.at(lo_x, primal, xs)
    np.minimum.at(lo_y, primal, ys)
    np.maximum.at(hi_x, primal, xs)
    np.maximum.at(hi_y, primal, ys)
    sizes = {int(u): int(c) for u, c in zip(uniq, counts)}
    boxes = {int(u): (int(lo_x[u]), int(lo_y[u]), int(hi_x[u]), int(hi_y[u])) for u in uniq}
    return ClusterLabeling(domain=dom, primal=primal, dual=dual, sizes=sizes, boxes=boxes)


def reach(domain: Domain, bits: np.ndarray, sources: Iterable[int],
          allowed: Optional[Callable[[Point], bool]] = None) -> Set[int]:
    """Vertex indices joined to a source by open edges inside the allowed set."""
    ok = None if allowed is None else [allowed(v) for v in domain.vertices]
    seen = {s for s in sources if ok is None or ok[s]}
    queue = deque(seen)
    while queue:
        x = queue.popleft()
        for y, k in domain.adjacency[x]:
            if bits[k] and y not in seen and (ok is None or ok[y]):
                seen.add(y)
                queue.append(y)
    return seen


def reach_matrix(domain: Domain, bits: np.ndarray, sources: Sequence[int],
                 allowed: Optional[np.ndarray] = None) -> np.ndarray:
    """Row-wise reachability for a bit matrix (rows x n_edges)."""
    rows = bits.shape[0]
    state = np.zeros((rows, domain.n_vertices), dtype=bool)
    state[:, list(sources)] = True
    edges = range(domain.n_edges)
    if allowed is not None:
        state &= allowed[None, :]
        edges = [k for k in edges if allowed[domain.edge_u[k]] and allowed[domain.edge_v[k]]]
    pairs = [(k, int(domain.edge_u[k]), int(domain.edge_v[k])) for k in edges]
    changed = True
    while changed:
        changed = False
        for k, u, v in pairs:
            o = bits[:, k]
            new_u = o & state[:, v] & ~state[:, u]
            new_v = o & state[:, u] & ~state[:, v]
            if new_u.any() or new_v.any():
                state[:, u] |= new_u
                state[:, v] |= new_v
                changed = True
    return state


def _check_bits(config: Configuration, domain: Domain) -> None:
    if config.domain is not domain and config.domain.edges != domain.edges:
        raise SizeMismatch("configuration does not live on the quad's domain")


def has_crossing(quad: Quad, config: Configuration) -> bool:
    """Open path from arc (ab) to arc (cd) inside the domain."""
    dom = quad.domain
    _check_bits(config, dom)
    vi = dom.vertex_index
    targets = {vi[v] for v in quad.arc("cd")}
    found = reach(dom, config.bits, [vi[v] for v in quad.arc("ab")])
    return not targets.isdisjoint(found)


def crossing_event(quad: Quad) -> Callable[[np.ndarray], np.ndarray]:
    """Vectorised crossing indicator for bit matrices over the quad's domain."""
    dom = quad.domain
    src = [dom.vertex_index[v] for v in quad.arc("ab")]
    dst = [dom.vertex_index[v] for v in quad.arc("cd")]

    def event(bits: np.ndarray) -> np.ndarray:
        return reach_matrix(dom, bits, src)[:, dst].any(axis=1)

    return event


def dual_crossing(quad: Quad, config: Configuration) -> bool:
    """Dual-open path from the outside of arc (bc) to the outside of arc (da).

    Closed boundary edges of (bc) and (da) link their interior face to one
    virtual vertex per arc; closed edges on the other arcs are ignored.
    """
    dom = quad.domain
    _check_bits(config, dom)
    source, sink = dom.exterior, dom.exterior + 1
    virtual = {k: source for k in _arc_edge_set(dom, quad.arc("bc"))}
    virtual.update({k: sink for k in _arc_edge_set(dom, quad.arc("da"))})
    us, vs = [], []
    for k in np.flatnonzero(~config.bits).tolist():
        a, b = int(dom.dual_a[k]), int(dom.dual_b[k])
        if dom.exterior in (a, b):
            if k not in virtual:
                continue
            a, b = (virtual[k], b) if a == dom.exterior else (a, virtual[k])
        us.append(a)
        vs.append(b)
    n = dom.exterior + 2
    graph = sparse.coo_matrix((np.ones(len(us), dtype=np.int8), (us, vs)), shape=(n, n))
    _, labels = csgraph.connected_components(graph, directed=False)
    return bool(labels[source] == labels[sink])


def _arc_edge_set(dom: Domain, arc: List[Point]) -> List[int]:
    return [dom.edge_index[(min(u, w), max(u, w))] for u, w in zip(arc[:-1], arc[1:])]


def has_circuit(config: Configuration, center: Point, n: int, outer: Optional[int] = None) -> bool:
    """Open circuit in Lambda_outer(center) minus Lambda_n(center) surrounding Lambda_n(center).

    Decided by dual search: starting from a face inside the inner box, can
    the outer ring of faces be reached without crossing an open edge of
    the annulus? A circuit exists iff it cannot.
    """
    dom = config.domain
    outer = 2 * n if outer is None else outer
    if n < 1 or outer <= n:
        raise InvalidParams(f"need 1 <= n < outer, got n={n}, outer={outer}")
    if not contains_box(dom, center, outer):
        raise OutOfDomain(f"box of radius {outer} around {center} is not inside the domain")
    cx, cy = center

    def blocked(u: Point, w: Point) -> bool:
        if not (n < linf(u, center) <= outer and n < linf(w, center) <= outer):
            return False
        return bool(config.bits[dom.edge_index[(min(u, w), max(u, w))]])

    def escaped(f: Point) -> bool:
        i, j = f
        return i < cx - outer or i >= cx + outer or j < cy - outer or j >= cy + outer

    start = (cx, cy)
    seen = {start}
    queue = deque([start])
    while queue:
        f = queue.popleft()
        if escaped(f):
            return False
        i, j = f
        # neighbour face and the primal edge between the two faces
        steps = (((i + 1, j), (i + 1, j), (i + 1, j + 1)),
                 ((i - 1, j), (i, j), (i, j + 1)),
                 ((i, j + 1), (i, j + 1), (i + 1, j + 1)),
                 ((i, j - 1), (i, j), (i + 1, j)))
        for g, u, w in steps:
            if g in seen or blocked(u, w):
                continue
            seen.add(g)
            queue.append(g)
    return True


def _box_centres(v: Point, r: int) -> Iterable[Point]:
    s = max(1, r)
    xs = range(math.ceil((v[0] - r) / s), math.floor((v[0] + r) / s) + 1)
    ys = range(math.ceil((v[1] - r) / s), math.floor((v[1] + r) / s) + 1)
    return ((s * i, s * j) for i in xs for j in ys)


def count_boundary_boxes(config: Configuration, R: int, r: int) -> int:
    """Number of r-boxes meeting the boundary that are joined to Lambda_R inside Lambda_7R.

    r-boxes are the translates of Lambda_r by (1 v r) Z^2; r = 0 counts
    boundary vertices.
    """
    dom = config.domain
    if r < 0:
        raise InvalidParams(f"r must be >= 0, got {r}")
    if not is_r_centred(dom, R):
        raise NotCentred(f"domain is not {R}-centred")
    vi = dom.vertex_index
    found = reach(dom, config.bits, [vi[v] for v in box_points(ORIGIN, R)],
                  allowed=lambda v: linf(v, ORIGIN) <= 7 * R)
    touched = {c for i in found for c in _box_centres(dom.vertices[i], r)}
    boundary = {c for v in dom.boundary for c in _box_centres(v, r)}
    count = len(touched & boundary)
    logger.debug(f"[connectivity] M_{r}(D, {R}) = {count}")
    return count


def p_r_event(config: Configuration, R: int) -> bool:
    """Lambda_R joined to the boundary inside Lambda_9R."""
    dom = config.domain
    if not contains_box(dom, ORIGIN, R):
        raise OutOfDomain(f"box of radius {R} is not inside the domain")
    vi = dom.vertex_index
    found = reach(dom, config.bits, [vi[v] for v in box_points(ORIGIN, R)],
                  allowed=lambda v: linf(v, ORIGIN) <= 9 * R)
    return any(vi[v] in found for v in dom.boundary)


def h1_traversal_count(config: Configuration, annulus: Annulus,
                       loops: Optional[List[Tuple[List[MedialEdge], List[int]]]] = None) -> int:
    """Number of loop segments crossing the annulus from its inner to its outer box."""
    dom = config.domain
    if annulus.mask != "full":
        raise InvalidParams("interface traversals are counted on full annuli only")
    if not contains_box(dom, annulus.center, annulus.R):
        raise OutOfDomain(f"annulus around {annulus.center} is not inside the domain")
    cx, cy = 2 * annulus.center[0], 2 * annulus.center[1]
    inner, outer = 2 * annulus.r, 2 * annulus.R

    def zone(m) -> int:
        d = max(abs(m[0] - cx), abs(m[1] - cy))
        if d <= inner:
            return -1
        return 1 if d >= outer else 0

    loops = free_loops(config) if loops is None else loops
    count = 0
    for edges, _ in loops:
        zones = [zone(e[0]) for e in edges]
        if -1 not in zones or 1 not in zones:
            continue
        start = next(i for i, z in enumerate(zones) if z != 0)
        last = zones[start]
        for k in range(1, len(zones) + 1):
            z = zones[(start + k) % len(zones)]
            if z != 0 and z != last:
                count += 1
                last = z
    return count


def h1_event(config: Configuration, annulus: Annulus, k: int) -> bool:
    return h1_traversal_count(config, annulus) >= k
