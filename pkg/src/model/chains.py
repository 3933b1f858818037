"""
Chains of clusters.

A chain is a sequence of distinct clusters where consecutive clusters are
joined by a closed edge. The Hamming distance of a configuration to a
crossing event is the least number of closed edges on a crossing path; an
optimal path visits k + 1 distinct clusters.
"""
from __future__ import annotations

import logging
import math
from collections import deque
from dataclasses import dataclass, field
from typing import Dict, Iterable, List, Optional, Set, Tuple

import networkx as nx
import numpy as np
from scipy.spatial import cKDTree

from src.errors import InvalidParams, OutOfDomain
from src.lattice.domain import Domain, Quad
from src.model.connectivity import ClusterLabeling, clusters
from src.model.measure import BoundaryPartition, Configuration

logger = logging.getLogger(__name__)


@dataclass
class ClusterChain:
    clusters: List[int]
    defects: List[int] = field(default_factory=list)  # closed edges between consecutive clusters
    diameters: List[int] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.clusters)

    @property
    def min_diameter(self) -> int:
        return min(self.diameters) if self.diameters else 0


def zero_one_bfs(domain: Domain, bits: np.ndarray, sources: Iterable[int],
                 allowed: Optional[np.ndarray] = None) -> Tuple[Dict[int, int], Dict[int, Tuple[int, int]]]:
    """Closed-edge distance from the sources, with (previous vertex, edge) links."""
    dist: Dict[int, int] = {}
    prev: Dict[int, Tuple[int, int]] = {}
    queue = deque()
    for s in sources:
        if allowed is None or allowed[s]:
            dist[s] = 0
            queue.append(s)
    while queue:
        x = queue.popleft()
        d = dist[x]
        for y, k in domain.adjacency[x]:
            if allowed is not None and not allowed[y]:
                continue
            w = 0 if bits[k] else 1
            if d + w < dist.get(y, math.inf):
                dist[y] = d + w
                prev[y] = (x, k)
                if w == 0:
                    queue.appendleft(y)
                else:
                    queue.append(y)
    return dist, prev


def _chain_from_path(labels: ClusterLabeling, path: List[int], edges: List[int]) -> ClusterChain:
    ids: List[int] = []
    defects: List[int] = []
    for i, v in enumerate(path):
        lab = int(labels.primal[v])
        if not ids:
            ids.append(lab)
        elif lab != ids[-1]:
            ids.append(lab)
            defects.append(edges[i - 1])
    return ClusterChain(clusters=ids, defects=defects, diameters=[labels.diameter(c) for c in ids])


def hamming_crossing(config: Configuration, quad: Quad) -> Tuple[int, ClusterChain]:
    """Least number of closed edges on a path from (ab) to (cd), with the clusters it visits."""
    dom = quad.domain
    vi = dom.vertex_index
    sources = [vi[v] for v in quad.arc("ab")]
    targets = [vi[v] for v in quad.arc("cd")]
    dist, prev = zero_one_bfs(dom, config.bits, sources)
    end = min(targets, key=lambda t: (dist.get(t, math.inf), t))
    k = dist[end]
    path, edges = [end], []
    while path[-1] in prev:
        x, e = prev[path[-1]]
        path.append(x)
        edges.append(e)
    path.reverse()
    edges.reverse()
    chain = _chain_from_path(clusters(config), path, edges)
    logger.debug(f"[chains] Hamming distance {k}, chain of {len(chain)} clusters")
    return k, chain


def hamming_dijkstra(config: Configuration, quad: Quad) -> int:
    """Reference value through networkx Dijkstra on 0/1 weights."""
    dom = quad.domain
    g = nx.Graph()
    for k, (u, v) in enumerate(zip(dom.edge_u.tolist(), dom.edge_v.tolist())):
        g.add_edge(u, v, weight=0 if config.bits[k] else 1)
    vi = dom.vertex_index
    for v in quad.arc("ab"):
        g.add_edge("S", vi[v], weight=0)
    for v in quad.arc("cd"):
        g.add_edge(vi[v], "T", weight=0)
    return int(nx.dijkstra_path_length(g, "S", "T"))


@dataclass(frozen=True)
class ChainEvents:
    G: bool
    H: bool
    F: bool
    k: int
    chain_length: int

    def as_dict(self) -> Dict[str, bool]:
        return {"G": self.G, "H": self.H, "F": self.F}


def _rectangle(domain: Domain, width: int, height: int) -> np.ndarray:
    allowed = np.zeros(domain.n_vertices, dtype=bool)
    for x in range(width + 1):
        for y in range(height + 1):
            i = domain.vertex_index.get((x, y))
            if i is None:
                raise OutOfDomain(f"rectangle vertex {(x, y)} is outside the domain")
            allowed[i] = True
    return allowed


def _restricted(config: Configuration, allowed: np.ndarray) -> Configuration:
    dom = config.domain
    keep = allowed[dom.edge_u] & allowed[dom.edge_v]
    return Configuration(dom, config.bits & keep)


def _contraction_graph(config: Configuration, labels: ClusterLabeling, allowed: np.ndarray) -> Dict[int, Set[int]]:
    """Clusters adjacent through a closed edge of the rectangle."""
    dom = config.domain
    adj: Dict[int, Set[int]] = {}
    for k in np.flatnonzero(~config.bits).tolist():
        u, v = int(dom.edge_u[k]), int(dom.edge_v[k])
        if not (allowed[u] and allowed[v]):
            continue
        a, b = int(labels.primal[u]), int(labels.primal[v])
        if a != b:
            adj.setdefault(a, set()).add(b)
            adj.setdefault(b, set()).add(a)
    return adj


def _chain_length(adj: Dict[int, Set[int]], sources: Set[int], targets: Set[int], nodes: Set[int]) -> float:
    """Fewest clusters on a chain from sources to targets through `nodes`."""
    start = sources & nodes
    dist = {c: 1 for c in start}
    queue = deque(start)
    while queue:
        c = queue.popleft()
        if c in targets:
            return dist[c]
        for d in adj.get(c, ()):
            if d in nodes and d not in dist:
                dist[d] = dist[c] + 1
                queue.append(d)
    return math.inf


def _cluster_distance(a: np.ndarray, b: np.ndarray) -> float:
    tree = cKDTree(b)
    d, _ = tree.query(a, k=1, p=np.inf)
    return float(np.min(d))


def chain_events(config: Configuration, N: int, ell: float, K: int, alpha: float,
                 delta: float) -> ChainEvents:
    """G, H and F events on the rectangle [0, ell N] x [0, N].

    G: a left-right chain of at most K clusters, all of diameter >= alpha N.
    H: every two clusters of diameter >= delta N are joined by a chain of at
       most K clusters of diameter >= alpha N.
    F: two clusters of diameter >= delta N at distance in (1, alpha N].
    """
    if N < 1 or ell <= 0 or K < 1 or alpha <= 0 or delta <= 0:
        raise InvalidParams("chain parameters must be positive")
    width, height = int(math.floor(ell * N)), N
    dom = config.domain
    allowed = _rectangle(dom, width, height)
    rect = _restricted(config, allowed)
    labels = clusters(rect, BoundaryPartition.free(dom))
    inside = {int(labels.primal[i]) for i in np.flatnonzero(allowed)}
    diam = {c: labels.diameter(c) for c in inside}
    large = {c for c in inside if diam[c] >= alpha * N}
    big = {c for c in inside if diam[c] >= delta * N}
    adj = _contraction_graph(rect, labels, allowed)

    left = {int(labels.primal[dom.vertex_index[(0, y)]]) for y in range(height + 1)}
    right = {int(labels.primal[dom.vertex_index[(width, y)]]) for y in range(height + 1)}
    g_len = _chain_length(adj, left, right, large)
    g_event = g_len <= K

    h_event = True
    ordered = sorted(big)
    for i, c in enumerate(ordered):
        for d in ordered[i + 1:]:
            if _chain_length(adj, {c}, {d}, large | {c, d}) > K:
                h_event = False
                break
        if not h_event:
            break

    f_event = False
    points = {c: dom.coords[labels.members(c)] for c in ordered}
    for i, c in enumerate(ordered):
        for d in ordered[i + 1:]:
            dist = _cluster_distance(points[c], points[d])
            if 1 < dist <= alpha * N:
                f_event = True
                break
        if f_event:
            break

    quad_k = _rect_hamming(rect, allowed, width, height)
    return ChainEvents(G=g_event, H=h_event, F=f_event, k=quad_k,
                       chain_length=int(g_len) if g_len < math.inf else -1)


def _rect_hamming(config: Configuration, allowed: np.ndarray, width: int, height: int) -> int:
    dom = config.domain
    vi = dom.vertex_index
    dist, _ = zero_one_bfs(dom, config.bits, [vi[(0, y)] for y in range(height + 1)], allowed)
    return min(dist.get(vi[(width, y)], math.inf) for y in range(height + 1))
