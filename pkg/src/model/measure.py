"""
Random-cluster measure: weights, boundary conditions, configurations.

The unnormalised weight of a configuration w is
    (p / (1 - p)) ** |w| * q ** k(w^xi)
where k counts clusters after every boundary block of xi is contracted.
"""
from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Iterable, List, Optional, Sequence, Tuple

import numpy as np
from scipy import sparse
from scipy.sparse import csgraph

from src.errors import InvalidMarks, InvalidParams, SizeMismatch
from src.lattice.domain import Domain, Point
from src.utils.formats import bits_to_string, string_to_bits
from src.utils.unionfind import UnionFind

logger = logging.getLogger(__name__)


def critical_p(q: float) -> float:
    if q <= 0:
        raise InvalidParams(f"q must be positive, got {q}")
    s = math.sqrt(q)
    return s / (1.0 + s)


@dataclass(frozen=True)
class Weights:
    p: float
    q: float

    def __post_init__(self):
        if not (0.0 < self.p < 1.0):
            raise InvalidParams(f"p must lie in (0, 1), got {self.p}")
        if not self.q > 0.0:
            raise InvalidParams(f"q must be positive, got {self.q}")

    @classmethod
    def critical(cls, q: float) -> "Weights":
        return cls(p=critical_p(q), q=q)

    @property
    def edge_factor(self) -> float:
        return self.p / (1.0 - self.p)

    @property
    def log_edge_factor(self) -> float:
        return math.log(self.p) - math.log1p(-self.p)

    def open_probability(self, connected: bool) -> float:
        """Conditional probability that an edge is open given the rest."""
        if connected:
            return self.p
        return self.p / (self.p + (1.0 - self.p) * self.q)


class BoundaryPartition:
    """Partition of the boundary vertices of a domain into wired blocks."""

    def __init__(self, domain: Domain, blocks: Sequence[Sequence[Point]], name: str = "custom"):
        self.domain = domain
        self.name = name
        seen = set()
        index_blocks: List[Tuple[int, ...]] = []
        for block in blocks:
            idx = []
            for v in block:
                if not domain.on_boundary(v):
                    raise InvalidMarks(f"partition vertex {v} is not on the boundary")
                if v in seen:
                    raise InvalidParams(f"partition blocks overlap at {v}")
                seen.add(v)
                idx.append(domain.vertex_index[v])
            if idx:
                index_blocks.append(tuple(sorted(idx)))
        for v in domain.boundary:
            if v not in seen:
                index_blocks.append((domain.vertex_index[v],))
        self.blocks: Tuple[Tuple[int, ...], ...] = tuple(sorted(index_blocks))

        rep = np.arange(domain.n_vertices, dtype=np.int64)
        for block in self.blocks:
            rep[list(block)] = block[0]
        self.representative = rep

    @classmethod
    def free(cls, domain: Domain) -> "BoundaryPartition":
        return cls(domain, [], name="free")

    @classmethod
    def wired(cls, domain: Domain) -> "BoundaryPartition":
        return cls(domain, [list(domain.boundary)], name="wired")

    @classmethod
    def dobrushin(cls, domain: Domain, a: Point, b: Point) -> "BoundaryPartition":
        """Free on the arc (ab), wired on the arc (ba)."""
        return cls(domain, [domain.arc(b, a)], name="dobrushin")

    @classmethod
    def from_name(cls, domain: Domain, name: str, marks: Optional[Tuple[Point, Point]] = None) -> "BoundaryPartition":
        if name == "free":
            return cls.free(domain)
        if name == "wired":
            return cls.wired(domain)
        if name == "dobrushin":
            if marks is None:
                raise InvalidMarks("dobrushin boundary conditions need marks a, b")
            return cls.dobrushin(domain, *marks)
        raise InvalidParams(f"unknown boundary condition {name!r}")

    def wired_blocks(self) -> List[Tuple[int, ...]]:
        return [b for b in self.blocks if len(b) > 1]

    def block_links(self) -> List[Tuple[int, int]]:
        """Pairs of vertex indices that chain each wired block together."""
        links = []
        for block in self.wired_blocks():
            links.extend(zip(block[:-1], block[1:]))
        return links

    def __repr__(self) -> str:
        return f"BoundaryPartition({self.name}, {len(self.wired_blocks())} wired blocks)"


@dataclass
class Configuration:
    """One bit per edge of the domain, in canonical edge order."""
    domain: Domain
    bits: np.ndarray = field(repr=False)

    def __post_init__(self):
        self.bits = np.asarray(self.bits, dtype=bool)
        if self.bits.shape != (self.domain.n_edges,):
            raise SizeMismatch(f"configuration has {self.bits.size} bits, domain has {self.domain.n_edges} edges")

    @classmethod
    def empty(cls, domain: Domain) -> "Configuration":
        return cls(domain, np.zeros(domain.n_edges, dtype=bool))

    @classmethod
    def full(cls, domain: Domain) -> "Configuration":
        return cls(domain, np.ones(domain.n_edges, dtype=bool))

    @classmethod
    def from_index(cls, domain: Domain, index: int) -> "Configuration":
        """Bit j of the integer index is the state of edge j."""
        bits = (int(index) >> np.arange(domain.n_edges)) & 1
        return cls(domain, bits.astype(bool))

    @classmethod
    def from_string(cls, domain: Domain, text: str) -> "Configuration":
        return cls(domain, string_to_bits(text))

    @classmethod
    def from_edges(cls, domain: Domain, open_edges: Iterable) -> "Configuration":
        bits = np.zeros(domain.n_edges, dtype=bool)
        for e in open_edges:
            u, w = e
            k = domain.edge_index.get((u, w) if u <= w else (w, u))
            if k is None:
                raise InvalidParams(f"edge {e} is not in the domain")
            bits[k] = True
        return cls(domain, bits)

    def to_string(self) -> str:
        return bits_to_string(self.bits)

    def n_open(self) -> int:
        return int(self.bits.sum())

    def copy(self) -> "Configuration":
        return Configuration(self.domain, self.bits.copy())

    def with_edge(self, k: int, state: bool) -> "Configuration":
        bits = self.bits.copy()
        bits[k] = state
        return Configuration(self.domain, bits)


def _check(config: Configuration, bc: BoundaryPartition) -> None:
    if config.domain is not bc.domain and config.domain.edges != bc.domain.edges:
        raise SizeMismatch("configuration and boundary condition live on different domains")


def cluster_union_find(config: Configuration, bc: BoundaryPartition) -> UnionFind:
    _check(config, bc)
    dom = config.domain
    uf = UnionFind(dom.n_vertices)
    for u, v in bc.block_links():
        uf.union(u, v)
    for k in np.flatnonzero(config.bits).tolist():
        uf.union(int(dom.edge_u[k]), int(dom.edge_v[k]))
    return uf


def cluster_count(config: Configuration, bc: BoundaryPartition) -> int:
    return cluster_union_find(config, bc).count_roots()


def log_weight(config: Configuration, bc: BoundaryPartition, w: Weights) -> float:
    k = cluster_count(config, bc)
    return config.n_open() * w.log_edge_factor + k * math.log(w.q)


def weight(config: Configuration, bc: BoundaryPartition, w: Weights) -> float:
    return math.exp(log_weight(config, bc, w))


@dataclass
class ExactMeasure:
    """Exhaustive measure over all 2^|E| configurations.

    Configuration i has bit j equal to edge j. Per configuration only the
    open-edge count and the cluster count are stored; weights follow from them.
    """
    domain: Domain
    partition: BoundaryPartition
    weights: Weights
    n_open: np.ndarray = field(repr=False)
    clusters: np.ndarray = field(repr=False)
    log_z: float = 0.0

    @property
    def n_edges(self) -> int:
        return self.domain.n_edges

    @property
    def z(self) -> float:
        try:
            return math.exp(self.log_z)
        except OverflowError:
            return math.inf

    def log_weights(self) -> np.ndarray:
        return self.n_open * self.weights.log_edge_factor + self.clusters * math.log(self.weights.q)

    def probabilities(self) -> np.ndarray:
        return np.exp(self.log_weights() - self.log_z)

    def to_json(self) -> dict:
        return {"q": self.weights.q, "p": self.weights.p, "edges": self.n_edges, "logZ": self.log_z}

    def save_json(self, path: Path | str) -> None:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(json.dumps(self.to_json(), indent=2), encoding="utf-8")


def logsumexp(values: np.ndarray) -> float:
    if values.size == 0:
        return -math.inf
    m = float(values.max())
    return m + math.log(float(np.exp(values - m).sum()))


def index_bits(indices: np.ndarray, n_edges: int) -> np.ndarray:
    """Bit matrix (len(indices) x n_edges) for integer configuration indices."""
    return ((indices[:, None] >> np.arange(n_edges, dtype=np.int64)[None, :]) & 1).astype(bool)


def exact_probability(em: ExactMeasure, event: Callable[[Configuration], bool],
                      vectorized: bool = False, chunk: int = 1 << 14) -> float:
    """Sum of the normalised weights of configurations in the event.

    With vectorized=True the event receives a bit matrix for a block of
    configurations and returns a boolean array.
    """
    probs = em.probabilities()
    total = 0.0
    size = probs.size
    for start in range(0, size, chunk):
        idx = np.arange(start, min(start + chunk, size), dtype=np.int64)
        bits = index_bits(idx, em.n_edges)
        if vectorized:
            mask = np.asarray(event(bits), dtype=bool)
        else:
            mask = np.fromiter((bool(event(Configuration(em.domain, row))) for row in bits),
                               dtype=bool, count=len(idx))
        total += math.fsum(probs[idx][mask].tolist())
    return min(max(total, 0.0), 1.0)


def exact_expectation(em: ExactMeasure, observable: Callable[[np.ndarray], np.ndarray],
                      chunk: int = 1 << 14) -> np.ndarray:
    """Expectation of an array-valued observable evaluated on bit matrices.

    observable(bits) must return an array of shape (len(bits), ...).
    """
    probs = em.probabilities()
    acc = None
    size = probs.size
    for start in range(0, size, chunk):
        idx = np.arange(start, min(start + chunk, size), dtype=np.int64)
        values = np.asarray(observable(index_bits(idx, em.n_edges)), dtype=float)
        part = np.tensordot(probs[idx], values, axes=(0, 0))
        acc = part if acc is None else acc + part
    return acc


def cluster_labels(domain: Domain, bits: np.ndarray, bc: BoundaryPartition) -> Tuple[int, np.ndarray]:
    """Component count and per-vertex component id, wired blocks contracted."""
    bits = np.asarray(bits, dtype=bool)
    if bits.shape != (domain.n_edges,):
        raise SizeMismatch(f"configuration has {bits.size} bits, domain has {domain.n_edges} edges")
    links = bc.block_links()
    u = domain.edge_u[bits]
    v = domain.edge_v[bits]
    if links:
        lu, lv = zip(*links)
        u = np.concatenate([u, np.asarray(lu, dtype=np.int64)])
        v = np.concatenate([v, np.asarray(lv, dtype=np.int64)])
    n = domain.n_vertices
    graph = sparse.coo_matrix((np.ones(u.size, dtype=np.int8), (u, v)), shape=(n, n))
    n_comp, labels = csgraph.connected_components(graph, directed=False)
    return int(n_comp), labels
