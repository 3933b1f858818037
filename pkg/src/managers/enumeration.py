"""
Exhaustive enumeration of configurations.

The 2^n index range is cut into contiguous chunks that are processed on the
job pool and reduced in chunk order. Cluster counts are computed for a whole
chunk at once by min-label propagation over a bit matrix.
"""
from __future__ import annotations

import logging
import time
from dataclasses import dataclass
from typing import Callable, List, Optional, Sequence, TypeVar

import numpy as np

from src.errors import CapExceeded
from src.lattice.domain import Domain
from src.managers.jobs import run_jobs
from src.model.measure import BoundaryPartition, ExactMeasure, Weights, index_bits, logsumexp

logger = logging.getLogger(__name__)

DEFAULT_CAP = 24
DEFAULT_CHUNK_BITS = 14

R = TypeVar("R")


@dataclass
class EnumChunk:
    """One contiguous block of configuration indices with its statistics."""
    index: int
    start: int
    bits: np.ndarray      # (size, n_edges) over the enumerated edges
    n_open: np.ndarray
    clusters: np.ndarray


def chunk_cluster_counts(bits: np.ndarray, n_vertices: int, edge_u: np.ndarray, edge_v: np.ndarray,
                         links: Sequence[tuple] = ()) -> np.ndarray:
    """Cluster count per row of a bit matrix.

    Labels start at the vertex index and shrink to the component minimum;
    `links` are always-open pairs (wired blocks).
    """
    rows = bits.shape[0]
    labels = np.tile(np.arange(n_vertices, dtype=np.int32), (rows, 1))
    us = list(edge_u.tolist()) + [int(u) for u, _ in links]
    vs = list(edge_v.tolist()) + [int(v) for _, v in links]
    n_edges = bits.shape[1]
    always = np.ones(rows, dtype=bool)
    changed = True
    while changed:
        changed = False
        for k, (u, v) in enumerate(zip(us, vs)):
            lu = labels[:, u]
            lv = labels[:, v]
            is_open = bits[:, k] if k < n_edges else always
            smaller = np.minimum(lu, lv)
            upd = is_open & (lu != lv)
            if upd.any():
                changed = True
                labels[upd, u] = smaller[upd]
                labels[upd, v] = smaller[upd]
    return (labels == np.arange(n_vertices, dtype=np.int32)[None, :]).sum(axis=1)


class Enumerator:
    """Walks every configuration of a chosen edge subset of a domain.

    Edges outside the subset are closed. Configuration index i has bit j equal
    to the state of the j-th enumerated edge.
    """

    def __init__(
        self,
        domain: Domain,
        partition: BoundaryPartition,
        edge_subset: Optional[Sequence[int]] = None,
        cap: int = DEFAULT_CAP,
        chunk_bits: int = DEFAULT_CHUNK_BITS,
        workers: Optional[int] = None,
    ):
        self.domain = domain
        self.partition = partition
        self.edge_subset = np.arange(domain.n_edges) if edge_subset is None else np.asarray(edge_subset, dtype=np.int64)
        self.n_edges = int(self.edge_subset.size)
        if self.n_edges > cap:
            raise CapExceeded(required=self.n_edges, cap=cap)
        self.chunk_bits = max(1, min(chunk_bits, self.n_edges)) if self.n_edges else 0
        self.workers = workers
        self._edge_u = domain.edge_u[self.edge_subset]
        self._edge_v = domain.edge_v[self.edge_subset]
        self._links = partition.block_links()

    @property
    def size(self) -> int:
        return 1 << self.n_edges

    def chunk_ranges(self) -> List[tuple]:
        step = 1 << self.chunk_bits
        return [(i, start, min(start + step, self.size)) for i, start in enumerate(range(0, self.size, step))]

    def build_chunk(self, index: int, start: int, stop: int) -> EnumChunk:
        idx = np.arange(start, stop, dtype=np.int64)
        bits = index_bits(idx, self.n_edges)
        clusters = chunk_cluster_counts(bits, self.domain.n_vertices, self._edge_u, self._edge_v, self._links)
        return EnumChunk(index=index, start=start, bits=bits,
                         n_open=bits.sum(axis=1).astype(np.int16), clusters=clusters.astype(np.int32))

    def full_bits(self, sub_bits: np.ndarray) -> np.ndarray:
        """Lift a bit matrix over the enumerated edges to all domain edges."""
        out = np.zeros((sub_bits.shape[0], self.domain.n_edges), dtype=bool)
        out[:, self.edge_subset] = sub_bits
        return out

    def run(self, reducer: Callable[[EnumChunk], R]) -> List[R]:
        """Apply reducer to every chunk; results come back in chunk order."""
        started = time.perf_counter()

        def work(job):
            return reducer(self.build_chunk(*job))

        results = run_jobs(work, self.chunk_ranges(), workers=self.workers, name="enumeration")
        logger.info(f"[enumeration] {self.size} configurations over {self.n_edges} edges "
                    f"in {(time.perf_counter() - started) * 1000:.0f} ms")
        return results


def enumerate_measure(domain: Domain, bc: BoundaryPartition, w: Weights, cap: int = DEFAULT_CAP,
                      chunk_bits: int = DEFAULT_CHUNK_BITS, workers: Optional[int] = None) -> ExactMeasure:
    """Exact random-cluster measure over all 2^|E| configurations."""
    enum = Enumerator(domain, bc, cap=cap, chunk_bits=chunk_bits, workers=workers)
    parts = enum.run(lambda ch: (ch.n_open, ch.clusters))
    n_open = np.concatenate([p[0] for p in parts])
    clusters = np.concatenate([p[1] for p in parts])
    em = ExactMeasure(domain=domain, partition=bc, weights=w, n_open=n_open, clusters=clusters)
    em.log_z = logsumexp(em.log_weights())
    logger.debug(f"[enumeration] logZ={em.log_z:.6f} for q={w.q}, p={w.p:.6f}, bc={bc.name}")
    return em
