"""
Markov chain Monte Carlo for the random-cluster measure.

Two dynamics are available: single-edge heat-bath (systematic scan in
canonical edge order) and Chayes-Machta cluster moves for q >= 1. Chains are
strictly sequential; independent chains run on the job pool and are merged by
chain index.
"""
from __future__ import annotations

import json
import logging
import time
from collections import deque
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Dict, Iterator, List, Optional, Tuple

import numpy as np

from src.errors import InvalidParams, UnsupportedQ
from src.lattice.domain import Domain, build_domain
from src.managers.jobs import run_jobs
from src.model.measure import BoundaryPartition, Configuration, Weights, cluster_labels
from src.utils import stats
from src.utils.formats import write_sample_dump
from src.utils.rng import chain_seed, make_rng

logger = logging.getLogger(__name__)

ALGORITHMS = ("heat-bath", "chayes-machta")
DEFAULT_BURN_IN = 100


def endpoints_connected_without(domain: Domain, bits: np.ndarray, bc: BoundaryPartition, e: int) -> bool:
    """Whether the endpoints of edge e are joined in (w minus e) with blocks contracted."""
    start = int(domain.edge_u[e])
    target = int(domain.edge_v[e])
    blocks = _block_lookup(bc)
    seen = {start}
    queue = deque([start])
    while queue:
        x = queue.popleft()
        if x == target:
            return True
        block = blocks.get(x)
        if block is not None:
            for y in block:
                if y not in seen:
                    seen.add(y)
                    queue.append(y)
        for y, k in domain.adjacency[x]:
            if k != e and bits[k] and y not in seen:
                seen.add(y)
                queue.append(y)
    return False


def _block_lookup(bc: BoundaryPartition) -> Dict[int, Tuple[int, ...]]:
    cached = getattr(bc, "_block_lookup", None)
    if cached is None:
        cached = {v: block for block in bc.wired_blocks() for v in block}
        bc._block_lookup = cached
    return cached


def _heat_bath_update(domain: Domain, bits: np.ndarray, bc: BoundaryPartition, w: Weights,
                      u: float, e: int) -> None:
    connected = endpoints_connected_without(domain, bits, bc, e)
    bits[e] = u < w.open_probability(connected)


def heat_bath_step(config: Configuration, bc: BoundaryPartition, w: Weights,
                   rng: np.random.Generator, e: int) -> Configuration:
    """Resample edge e from its conditional law given every other edge."""
    if not 0 <= e < config.domain.n_edges:
        raise InvalidParams(f"edge index {e} out of range")
    bits = config.bits.copy()
    _heat_bath_update(config.domain, bits, bc, w, float(rng.random()), e)
    return Configuration(config.domain, bits)


def _heat_bath_sweep(domain: Domain, bits: np.ndarray, bc: BoundaryPartition, w: Weights,
                     rng: np.random.Generator) -> None:
    draws = rng.random(domain.n_edges)
    for e in range(domain.n_edges):
        _heat_bath_update(domain, bits, bc, w, float(draws[e]), e)


def _chayes_machta_update(domain: Domain, bits: np.ndarray, bc: BoundaryPartition, w: Weights,
                          rng: np.random.Generator) -> None:
    n_comp, labels = cluster_labels(domain, bits, bc)
    active = rng.random(n_comp) < 1.0 / w.q
    both = active[labels[domain.edge_u]] & active[labels[domain.edge_v]]
    count = int(both.sum())
    if count:
        bits[both] = rng.random(count) < w.p


def chayes_machta_step(config: Configuration, bc: BoundaryPartition, w: Weights,
                       rng: np.random.Generator) -> Configuration:
    """Activate clusters with probability 1/q and refresh edges inside the active set."""
    if w.q < 1.0:
        raise UnsupportedQ(f"Chayes-Machta dynamics need q >= 1, got {w.q}")
    bits = config.bits.copy()
    _chayes_machta_update(config.domain, bits, bc, w, rng)
    return Configuration(config.domain, bits)


@dataclass
class ChainSpec:
    domain: Domain
    bc: BoundaryPartition
    weights: Weights
    seed: int
    burn_in: int = DEFAULT_BURN_IN
    thin: int = 1
    algorithm: str = "chayes-machta"

    def __post_init__(self):
        if self.algorithm not in ALGORITHMS:
            raise InvalidParams(f"algorithm must be one of {ALGORITHMS}, got {self.algorithm!r}")
        if self.burn_in < 0 or self.thin < 0:
            raise InvalidParams("burn_in and thin must be >= 0")
        if self.algorithm == "chayes-machta" and self.weights.q < 1.0:
            raise UnsupportedQ(f"Chayes-Machta dynamics need q >= 1, got {self.weights.q}")

    def with_seed(self, seed: int) -> "ChainSpec":
        return ChainSpec(self.domain, self.bc, self.weights, seed, self.burn_in, self.thin, self.algorithm)

    def to_json(self) -> dict:
        blocks = [[list(self.domain.vertices[i]) for i in b] for b in self.bc.wired_blocks()]
        return {
            "loop": [list(v) for v in self.domain.boundary],
            "bc": self.bc.name,
            "blocks": blocks,
            "p": self.weights.p,
            "q": self.weights.q,
            "seed": self.seed,
            "burn_in": self.burn_in,
            "thin": self.thin,
            "algorithm": self.algorithm,
        }

    @classmethod
    def from_json(cls, data: dict) -> "ChainSpec":
        domain = build_domain(data["loop"])
        blocks = [[tuple(v) for v in block] for block in data.get("blocks", [])]
        bc = BoundaryPartition(domain, blocks, name=data.get("bc", "custom"))
        return cls(domain, bc, Weights(p=data["p"], q=data["q"]), int(data["seed"]),
                   int(data.get("burn_in", DEFAULT_BURN_IN)), int(data.get("thin", 1)),
                   data.get("algorithm", "chayes-machta"))

    def save_json(self, path: Path | str) -> None:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(json.dumps(self.to_json(), indent=2), encoding="utf-8")


@dataclass
class SampleStream:
    spec: ChainSpec
    sweeps: np.ndarray = field(repr=False)
    configs: np.ndarray = field(repr=False)  # (n_samples, n_edges) bool
    chain_index: int = 0
    elapsed_ms: float = 0.0

    def __len__(self) -> int:
        return int(self.configs.shape[0])

    def __iter__(self) -> Iterator[Configuration]:
        for row in self.configs:
            yield Configuration(self.spec.domain, row)

    def observable(self, fn: Callable[[Configuration], float]) -> np.ndarray:
        return np.array([float(fn(c)) for c in self], dtype=float)

    def dump(self, path: Path | str) -> int:
        return write_sample_dump(path, zip(self.sweeps.tolist(), self.configs))


def _sweep_fn(spec: ChainSpec) -> Callable[[np.ndarray, np.random.Generator], None]:
    dom, bc, w = spec.domain, spec.bc, spec.weights
    if spec.algorithm == "heat-bath":
        return lambda bits, rng: _heat_bath_sweep(dom, bits, bc, w, rng)
    return lambda bits, rng: _chayes_machta_update(dom, bits, bc, w, rng)


def run_chain(spec: ChainSpec, n_samples: int, chain_index: int = 0,
              initial: Optional[np.ndarray] = None) -> SampleStream:
    """Burn in, then record n_samples configurations every `thin` sweeps."""
    if n_samples < 0:
        raise InvalidParams(f"n_samples must be >= 0, got {n_samples}")
    started = time.perf_counter()
    rng = make_rng(spec.seed)
    sweep = _sweep_fn(spec)
    bits = np.zeros(spec.domain.n_edges, dtype=bool) if initial is None else np.array(initial, dtype=bool)
    for _ in range(spec.burn_in):
        sweep(bits, rng)
    stride = max(1, spec.thin)
    configs = np.zeros((n_samples, spec.domain.n_edges), dtype=bool)
    sweeps = np.zeros(n_samples, dtype=np.int64)
    done = spec.burn_in
    for i in range(n_samples):
        for _ in range(stride):
            sweep(bits, rng)
        done += stride
        configs[i] = bits
        sweeps[i] = done
    elapsed = (time.perf_counter() - started) * 1000.0
    logger.debug(f"[sampler] chain {chain_index} ({spec.algorithm}, q={spec.weights.q}) "
                 f"{n_samples} samples in {elapsed:.0f} ms")
    return SampleStream(spec=spec, sweeps=sweeps, configs=configs, chain_index=chain_index, elapsed_ms=elapsed)


def run_chains(spec: ChainSpec, n_samples: int, n_chains: int = 1,
               workers: Optional[int] = None) -> List[SampleStream]:
    """Independent chains seeded master ^ splitmix64(i), returned by chain index."""
    payloads = [(i, spec.with_seed(chain_seed(spec.seed, i))) for i in range(n_chains)]
    streams = run_jobs(lambda job: run_chain(job[1], n_samples, chain_index=job[0]),
                       payloads, workers=workers, name="sampler")
    logger.info(f"[sampler] {n_chains} chains x {n_samples} samples done (q={spec.weights.q}, "
                f"{spec.algorithm}, |E|={spec.domain.n_edges})")
    return streams


def autocorrelation(stream: SampleStream, observable: Callable[[Configuration], float]) -> stats.AutocorrEstimate:
    """Integrated autocorrelation time of a scalar observable along the stream."""
    return stats.integrated_autocorr(stream.observable(observable))
