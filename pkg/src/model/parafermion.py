"""
Loop representation and the parafermionic observable.

A configuration on a Dobrushin domain is completed with open edges on the
wired arc (ba) and closed edges outside the domain. Curves on the medial
lattice never cross an open primal edge nor an open dual edge, so at every
medial vertex they take a quarter turn to the left or to the right. The curve
entering through e_a leaves through e_b; it is the exploration path.

Windings are counted in quarter turns (left = +1). The observable
    F(e) = E[exp(i sigma W(e, e_b) pi/2) 1{e on the exploration path}]
is computed exactly from one enumeration: per configuration the strand is
traced once and a histogram over (edge, winding, open edges, clusters) is
kept, from which F follows for every q and p without re-enumerating.
"""
from __future__ import annotations

import csv
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Dict, FrozenSet, Iterable, List, Optional, Sequence, Tuple

import numpy as np

from src.errors import InvalidContour, InvalidMarks, InvalidParams, NotInterior, NotOnPath, OutOfRange, TraceError
from src.lattice.domain import Domain, Point
from src.lattice.medial import DIAGONALS, MedialEdge, MedialGraph, MedialVertex, is_horizontal, medial_graph, orient
from src.managers.enumeration import DEFAULT_CAP, Enumerator
from src.model.measure import BoundaryPartition, Configuration, Weights, critical_p, logsumexp

logger = logging.getLogger(__name__)

DIR_INDEX: Dict[Tuple[int, int], int] = {d: i for i, d in enumerate(DIAGONALS)}
# indexed by [(dx + 1) // 2, (dy + 1) // 2]
_DIR_TABLE = np.array([[2, 3], [1, 0]], dtype=np.int64)
ETA: Dict[Tuple[int, int], complex] = {d: complex(d[0], d[1]) / math.sqrt(2.0) for d in DIAGONALS}
RELATION_COEFFS = (1.0 + 0j, -1j, -1.0 + 0j, 1j)  # NE, SE, SW, NW
_PAD = 4
_MC_CHUNK = 4096

StateFn = Callable[[MedialVertex], bool]


def sigma(q: float) -> float:
    """Spin sigma in [0, 1] with sin(sigma pi / 2) = sqrt(q) / 2."""
    if q <= 0:
        raise InvalidParams(f"q must be positive, got {q}")
    if q > 4:
        raise OutOfRange(f"sigma is only defined for q <= 4, got q={q}")
    return 2.0 / math.pi * math.asin(math.sqrt(q) / 2.0)


def step(cur: MedialVertex, back: Tuple[int, int], is_open: bool) -> Tuple[Tuple[int, int], int]:
    """Outgoing direction and turn at `cur` for a curve arriving from cur + back."""
    bx, by = back
    if is_horizontal(cur) == is_open:
        return (-bx, by), (1 if bx * by < 0 else -1)
    return (bx, -by), (1 if bx * by > 0 else -1)


def completed_state(graph: MedialGraph, bits: np.ndarray) -> StateFn:
    """Primal edge state under each medial vertex: wired arc open, outside closed."""
    bits = np.asarray(bits, dtype=bool)

    def state(m: MedialVertex) -> bool:
        k = graph.primal_index.get(m)
        if k is None:
            return False
        if k in graph.wired_edges:
            return True
        return bool(bits[k])

    return state


def trace_cap(domain: Domain) -> int:
    xs, ys = domain.coords[:, 0], domain.coords[:, 1]
    width = 2 * int(xs.max() - xs.min()) + 2 * _PAD + 1
    height = 2 * int(ys.max() - ys.min()) + 2 * _PAD + 1
    return 4 * width * height + 8


def trace_curve(start: MedialEdge, state: StateFn, stop: Optional[MedialEdge] = None,
                cap: int = 1 << 20) -> Tuple[List[MedialEdge], List[int]]:
    """Follow the curve through `start` until `stop`, or until it closes.

    turns[i] is the turn taken when entering edges[i]. For a closed loop,
    turns[0] is the closing turn, so sum(turns) is +4 or -4.
    """
    edges = [start]
    turns = [0]
    prev, cur = start
    for _ in range(cap):
        out, turn = step(cur, (prev[0] - cur[0], prev[1] - cur[1]), state(cur))
        nxt = (cur[0] + out[0], cur[1] + out[1])
        e = (cur, nxt)
        if stop is None and e == start:
            turns[0] = turn
            return edges, turns
        edges.append(e)
        turns.append(turn)
        if e == stop:
            return edges, turns
        prev, cur = cur, nxt
    raise TraceError(f"curve from {start} did not close within {cap} steps")


@dataclass
class LoopRepresentation:
    """Exploration path plus closed loops of one completed configuration."""
    strand: List[MedialEdge]
    turns: List[int]
    loops: List[List[MedialEdge]] = field(default_factory=list)

    def __post_init__(self):
        self._position = {e: i for i, e in enumerate(self.strand)}
        self._cumulative = np.cumsum(np.asarray(self.turns, dtype=np.int64))

    def on_path(self, e: MedialEdge) -> bool:
        return e in self._position

    def winding(self, e: MedialEdge) -> int:
        """Left minus right quarter turns from e to the end of the strand."""
        i = self._position.get(e)
        if i is None:
            raise NotOnPath(f"medial edge {e} is not on the exploration path")
        return int(self._cumulative[-1] - self._cumulative[i])

    def edge_multiplicity(self) -> Dict[MedialEdge, int]:
        counts: Dict[MedialEdge, int] = {}
        for e in self.strand:
            counts[e] = counts.get(e, 0) + 1
        for loop in self.loops:
            for e in loop:
                counts[e] = counts.get(e, 0) + 1
        return counts


def loop_representation(config: Configuration, a: Point, b: Point) -> LoopRepresentation:
    graph = medial_graph(config.domain, (a, b))
    state = completed_state(graph, config.bits)
    cap = trace_cap(config.domain)
    strand, turns = trace_curve(graph.e_a, state, stop=graph.e_b, cap=cap)
    seen = set(strand)
    loops = []
    for e in graph.edges:
        if e in seen:
            continue
        loop, _ = trace_curve(e, state, cap=cap)
        seen.update(loop)
        loops.append(loop)
    return LoopRepresentation(strand=strand, turns=turns, loops=loops)


def winding(rep: LoopRepresentation, e: MedialEdge) -> int:
    return rep.winding(e)


def free_loops(config: Configuration) -> List[Tuple[List[MedialEdge], List[int]]]:
    """Loops of the configuration completed by closed edges outside the domain."""
    graph = medial_graph(config.domain)
    state = completed_state(graph, config.bits)
    cap = trace_cap(config.domain)
    seen = set()
    loops = []
    for e in graph.edges:
        if e in seen:
            continue
        edges, turns = trace_curve(e, state, cap=cap)
        seen.update(edges)
        loops.append((edges, turns))
    return loops


class StrandTracer:
    """Traces the exploration path for a whole bit matrix at once.

    Medial positions live on a padded grid of doubled coordinates; each grid
    cell holds the bit-matrix column of its primal edge, or one of two pad
    columns that are constantly closed or open.
    """

    def __init__(self, graph: MedialGraph, domain: Domain, columns: np.ndarray):
        if graph.e_a is None or graph.e_b is None:
            raise InvalidMarks("strand tracing needs a Dobrushin medial graph")
        self.graph = graph
        self.n_columns = int(np.max(columns)) + 1 if len(columns) and np.max(columns) >= 0 else 0
        xs, ys = domain.coords[:, 0], domain.coords[:, 1]
        self.x0 = 2 * int(xs.min()) - _PAD
        self.y0 = 2 * int(ys.min()) - _PAD
        self.width = 2 * int(xs.max() - xs.min()) + 2 * _PAD + 1
        self.height = 2 * int(ys.max() - ys.min()) + 2 * _PAD + 1
        self.closed_col = self.n_columns
        self.open_col = self.n_columns + 1
        code = np.full(self.width * self.height, self.closed_col, dtype=np.int64)
        for m, k in graph.primal_index.items():
            code[self.pos(m)] = self.open_col if k in graph.wired_edges else int(columns[k])
        self.code = code
        self.cap = 4 * code.size + 8
        self.start_id = self.edge_id(graph.e_a)
        self.stop_id = self.edge_id(graph.e_b)

    def pos(self, m: MedialVertex) -> int:
        return (m[0] - self.x0) * self.height + (m[1] - self.y0)

    def edge_id(self, e: MedialEdge) -> int:
        d = (e[1][0] - e[0][0], e[1][1] - e[0][1])
        return self.pos(e[0]) * 4 + DIR_INDEX[d]

    def edge_of(self, eid: int) -> MedialEdge:
        g, d = divmod(int(eid), 4)
        mx, my = self.x0 + g // self.height, self.y0 + g % self.height
        dx, dy = DIAGONALS[d]
        return (mx, my), (mx + dx, my + dy)

    def trace(self, bits: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        """Edge ids (steps x rows, -1 after the end) and cumulative turns."""
        rows = bits.shape[0]
        padded = np.zeros((rows, self.n_columns + 2), dtype=bool)
        padded[:, :self.n_columns] = bits[:, :self.n_columns]
        padded[:, self.open_col] = True
        ar = np.arange(rows)

        src, tgt = self.graph.e_a
        pos = np.full(rows, self.pos(tgt), dtype=np.int64)
        bx = np.full(rows, src[0] - tgt[0], dtype=np.int64)
        by = np.full(rows, src[1] - tgt[1], dtype=np.int64)
        total = np.zeros(rows, dtype=np.int64)
        active = np.ones(rows, dtype=bool)
        ids = [np.full(rows, self.start_id, dtype=np.int64)]
        cum = [total.copy()]
        size = self.code.size

        for _ in range(self.cap):
            if not active.any():
                break
            is_open = padded[ar, self.code[pos]]
            horizontal = ((self.x0 + pos // self.height) & 1).astype(bool)
            xflip = horizontal == is_open
            bb = bx * by
            ox = np.where(xflip, -bx, bx)
            oy = np.where(xflip, by, -by)
            turn = np.where(xflip, np.where(bb < 0, 1, -1), np.where(bb > 0, 1, -1))
            total = total + np.where(active, turn, 0)
            eid = pos * 4 + _DIR_TABLE[(ox + 1) // 2, (oy + 1) // 2]
            ids.append(np.where(active, eid, -1))
            cum.append(total.copy())
            pos = np.where(active, pos + ox * self.height + oy, pos)
            if pos.min() < 0 or pos.max() >= size:
                raise TraceError("exploration path left the tracing window")
            bx, by = -ox, -oy
            active &= eid != self.stop_id
        else:
            if active.any():
                raise TraceError(f"exploration path did not reach e_b within {self.cap} steps")
        return np.vstack(ids), np.vstack(cum)


@dataclass
class ObservableField:
    """Complex value per medial edge; missing edges carry 0."""
    graph: MedialGraph
    q: float
    p: float
    sigma: float
    values: Dict[MedialEdge, complex] = field(repr=False)
    n_samples: Optional[int] = None

    def __getitem__(self, e: MedialEdge) -> complex:
        return self.values.get(e, 0j)

    def max_abs(self) -> float:
        return max((abs(v) for v in self.values.values()), default=0.0)

    def write_csv(self, path: Path | str) -> int:
        """Rows x1,y1,x2,y2 in half-unit coordinates, then Re F and Im F."""
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        rows = sorted(self.values.items())
        with path.open("w", newline="", encoding="utf-8") as f:
            writer = csv.writer(f)
            writer.writerow(["x1", "y1", "x2", "y2", "re", "im"])
            for ((x1, y1), (x2, y2)), v in rows:
                writer.writerow([x1, y1, x2, y2, repr(v.real), repr(v.imag)])
        return len(rows)


def _phase_sums(edge_ids: np.ndarray, values: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    uniq, inv = np.unique(edge_ids, return_inverse=True)
    re = np.bincount(inv, weights=values.real, minlength=uniq.size)
    im = np.bincount(inv, weights=values.imag, minlength=uniq.size)
    return uniq, re + 1j * im


@dataclass
class StrandHistogram:
    """Counts of (strand edge, winding, open edges, clusters) over all configurations."""
    tracer: StrandTracer
    edge_ids: np.ndarray
    windings: np.ndarray
    n_open: np.ndarray
    clusters: np.ndarray
    counts: np.ndarray
    config_n_open: np.ndarray
    config_clusters: np.ndarray
    config_counts: np.ndarray

    def field(self, q: float, p: Optional[float] = None) -> ObservableField:
        w = Weights(p=critical_p(q) if p is None else p, q=q)
        s = sigma(q)
        log_q = math.log(q)
        log_z = logsumexp(self.config_n_open * w.log_edge_factor + self.config_clusters * log_q
                          + np.log(self.config_counts.astype(float)))
        log_w = self.n_open * w.log_edge_factor + self.clusters * log_q - log_z
        values = self.counts * np.exp(log_w) * np.exp(1j * s * self.windings * math.pi / 2.0)
        uniq, sums = _phase_sums(self.edge_ids, values)
        field_values = {self.tracer.edge_of(eid): complex(v) for eid, v in zip(uniq.tolist(), sums.tolist())}
        return ObservableField(graph=self.tracer.graph, q=q, p=w.p, sigma=s, values=field_values)


def strand_histogram(domain: Domain, a: Point, b: Point, cap: int = DEFAULT_CAP,
                     workers: Optional[int] = None) -> StrandHistogram:
    key = ("strands", a, b, cap)
    cached = domain._medial_cache.get(key)
    if cached is not None:
        return cached

    graph = medial_graph(domain, (a, b))
    free_edges = np.array([k for k in range(domain.n_edges) if k not in graph.wired_edges], dtype=np.int64)
    enum = Enumerator(domain, BoundaryPartition.dobrushin(domain, a, b), edge_subset=free_edges,
                      cap=cap, workers=workers)
    columns = np.full(domain.n_edges, -1, dtype=np.int64)
    columns[free_edges] = np.arange(free_edges.size)
    tracer = StrandTracer(graph, domain, columns)

    w_off = tracer.cap
    w_span = 2 * tracer.cap + 1
    n_span = enum.n_edges + 1
    k_span = domain.n_vertices + 1

    def reduce(chunk):
        ids, cum = tracer.trace(chunk.bits)
        wind = cum[-1][None, :] - cum
        valid = ids >= 0
        row = np.broadcast_to(np.arange(ids.shape[1]), ids.shape)[valid]
        n_open = chunk.n_open.astype(np.int64)[row]
        k = chunk.clusters.astype(np.int64)[row]
        keys = ((ids[valid] * w_span + wind[valid] + w_off) * n_span + n_open) * k_span + k
        strand_keys, strand_counts = np.unique(keys, return_counts=True)
        cfg_keys, cfg_counts = np.unique(chunk.n_open.astype(np.int64) * k_span + chunk.clusters, return_counts=True)
        return strand_keys, strand_counts, cfg_keys, cfg_counts

    parts = enum.run(reduce)
    strand_keys, strand_counts = _merge([p[0] for p in parts], [p[1] for p in parts])
    cfg_keys, cfg_counts = _merge([p[2] for p in parts], [p[3] for p in parts])

    rest, k = np.divmod(strand_keys, k_span)
    rest, n_open = np.divmod(rest, n_span)
    edge_ids, wind = np.divmod(rest, w_span)
    hist = StrandHistogram(
        tracer=tracer,
        edge_ids=edge_ids,
        windings=wind - w_off,
        n_open=n_open,
        clusters=k,
        counts=strand_counts.astype(float),
        config_n_open=cfg_keys // k_span,
        config_clusters=cfg_keys % k_span,
        config_counts=cfg_counts,
    )
    logger.debug(f"[parafermion] strand histogram with {strand_keys.size} classes for a={a}, b={b}")
    domain._medial_cache[key] = hist
    return hist


def _merge(keys: Sequence[np.ndarray], counts: Sequence[np.ndarray]) -> Tuple[np.ndarray, np.ndarray]:
    all_keys = np.concatenate(keys)
    all_counts = np.concatenate(counts).astype(np.int64)
    uniq, inv = np.unique(all_keys, return_inverse=True)
    totals = np.zeros(uniq.size, dtype=np.int64)
    np.add.at(totals, inv, all_counts)
    return uniq, totals


def observable_exact(domain: Domain, a: Point, b: Point, q: float, p: Optional[float] = None,
                     cap: int = DEFAULT_CAP, workers: Optional[int] = None) -> ObservableField:
    """Exact observable under Dobrushin conditions, by enumeration of E minus (ba)."""
    sigma(q)
    return strand_histogram(domain, a, b, cap=cap, workers=workers).field(q, p)


def observable_mc(configs: np.ndarray, domain: Domain, a: Point, b: Point, weights: Weights) -> ObservableField:
    """Monte Carlo average of exp(i sigma W pi/2) 1{e in strand} over sampled configurations."""
    s = sigma(weights.q)
    graph = medial_graph(domain, (a, b))
    tracer = StrandTracer(graph, domain, np.arange(domain.n_edges, dtype=np.int64))
    configs = np.asarray(configs, dtype=bool)
    n = configs.shape[0]
    if n == 0:
        raise InvalidParams("observable_mc needs at least one sample")
    sums: Dict[int, complex] = {}
    for start in range(0, n, _MC_CHUNK):
        ids, cum = tracer.trace(configs[start:start + _MC_CHUNK])
        wind = cum[-1][None, :] - cum
        valid = ids >= 0
        values = np.exp(1j * s * wind[valid] * math.pi / 2.0)
        uniq, part = _phase_sums(ids[valid], values)
        for eid, v in zip(uniq.tolist(), part.tolist()):
            sums[eid] = sums.get(eid, 0j) + v
    values = {tracer.edge_of(eid): v / n for eid, v in sums.items()}
    return ObservableField(graph=graph, q=weights.q, p=weights.p, sigma=s, values=values, n_samples=n)


def vertex_relation_residual(F: ObservableField, v: MedialVertex) -> complex:
    """F(NE) - i F(SE) - F(SW) + i F(NW), directions taken from v."""
    if v not in F.graph.interior:
        raise NotInterior(f"medial vertex {v} is not interior")
    terms = [c * F[orient(v, (v[0] + d[0], v[1] + d[1]))] for c, d in zip(RELATION_COEFFS, DIAGONALS)]
    return complex(math.fsum(t.real for t in terms), math.fsum(t.imag for t in terms))


def contour_edges(graph: MedialGraph, vertices: Iterable[MedialVertex]) -> List[MedialEdge]:
    inside = frozenset(vertices)
    return [e for e in graph.edges if (e[0] in inside) != (e[1] in inside)]


def contour_sum(F: ObservableField, vertices: Optional[Iterable[MedialVertex]] = None,
                edges: Optional[Iterable[MedialEdge]] = None) -> complex:
    """Sum of eta(e) F(e) over a contour, eta pointing away from the enclosed vertices.

    Without `vertices` the whole interior set is enclosed; without `edges`
    the contour is every medial edge with exactly one endpoint enclosed.
    """
    inside: FrozenSet[MedialVertex] = F.graph.interior if vertices is None else frozenset(vertices)
    if not inside:
        raise InvalidContour("contour encloses no vertex")
    stray = inside - F.graph.interior
    if stray:
        raise InvalidContour(f"contour encloses non-interior vertices, e.g. {min(stray)}")
    contour = contour_edges(F.graph, inside) if edges is None else list(edges)
    re, im = [], []
    for e in contour:
        if (e[0] in inside) == (e[1] in inside):
            raise InvalidContour(f"medial edge {e} does not have exactly one endpoint inside")
        src, dst = (e[0], e[1]) if e[0] in inside else (e[1], e[0])
        term = ETA[(dst[0] - src[0], dst[1] - src[1])] * F[e]
        re.append(term.real)
        im.append(term.imag)
    return complex(math.fsum(re), math.fsum(im))


def diagonal_vertices(graph: MedialGraph, offset: int = 0) -> FrozenSet[MedialVertex]:
    """Interior vertices strictly below the anti-diagonal x + y = offset (doubled units)."""
    return frozenset(m for m in graph.interior if m[0] + m[1] < offset)


@dataclass(frozen=True)
class BetaPair:
    first: MedialEdge
    second: MedialEdge
    first_abs: float
    second_abs: float

    @property
    def gap(self) -> float:
        return abs(self.first_abs - self.second_abs)


def beta_pairs(F: ObservableField) -> List[BetaPair]:
    """Pairs of contour edges meeting at one wired-arc midpoint inside the same face."""
    graph = F.graph
    out = []
    for m, k in sorted(graph.primal_index.items()):
        if k not in graph.wired_edges:
            continue
        for s in (1, -1):
            if is_horizontal(m):
                n1, n2 = (m[0] - 1, m[1] + s), (m[0] + 1, m[1] + s)
            else:
                n1, n2 = (m[0] + s, m[1] - 1), (m[0] + s, m[1] + 1)
            if n1 in graph.interior and n2 in graph.interior:
                e, f = orient(m, n1), orient(m, n2)
                out.append(BetaPair(e, f, abs(F[e]), abs(F[f])))
    return out
