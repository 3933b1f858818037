"""
Experiment drivers.

Each exp_* function takes an ExperimentConfig and returns EstimateRecords in a
fixed order. Parameter points run one after another; the chains of one point
run on the job pool and come back in chain order, so the records depend only
on the configuration and its master seed.
"""

from __future__ import annotations

import logging
import math
import time
from dataclasses import asdict, dataclass, field, fields
from typing import Any, Callable, Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np

from src.errors import CapExceeded, ConfigError
from src.lattice import special
from src.lattice.domain import Annulus, Domain, Point, Quad, read_quad_file
from src.lattice.medial import medial_graph
from src.managers.enumeration import DEFAULT_CAP, DEFAULT_CHUNK_BITS, enumerate_measure
from src.managers.records import FORMATS, EstimateRecord
from src.managers.sampler import ALGORITHMS, ChainSpec, SampleStream, run_chains
from src.model.arms import ArmSpec, detect_arms, minimal_radius, one_arm_event
from src.model.chains import chain_events, hamming_crossing
from src.model.connectivity import count_boundary_boxes, crossing_event, p_r_event
from src.model.extremal import DEFAULT_TOL, extremal_distance
from src.model.measure import BoundaryPartition, Configuration, Weights, critical_p, exact_probability
from src.model.parafermion import (
    contour_sum,
    observable_mc,
    sigma,
    strand_histogram,
    vertex_relation_residual,
)
from src.utils.rng import chain_seed
from src.utils.stats import MeanEstimate, fit_power_law, mean_with_error

logger = logging.getLogger(__name__)

EXPERIMENTS = ("crossing", "arms", "touch", "chains", "parafermion")
DOMAIN_STREAM = 1 << 32  # seed offset for generated domains


# --- configuration --------------------------------------------------------

@dataclass
class ChainDefaults:
    algorithm: str = "chayes-machta"
    burn_in: int = 100
    thin: int = 1
    samples: int = 2000  # total over all chains
    chains: int = 2


@dataclass
class EnumerationSettings:
    cap: int = DEFAULT_CAP
    chunk_bits: int = DEFAULT_CHUNK_BITS


@dataclass
class CrossingSettings:
    quads: List[str] = field(default_factory=lambda: ["self-dual:4", "rect:8x4", "l-shape:3", "staircase:3"])
    bcs: List[str] = field(default_factory=lambda: ["free", "wired"])
    exact_edges: int = 16


@dataclass
class ArmSettings:
    sigma: List[str] = field(default_factory=lambda: ["10"])
    mask: str = "half"
    r: List[int] = field(default_factory=lambda: [2])
    R: List[int] = field(default_factory=lambda: [4, 8, 16])
    rho: List[int] = field(default_factory=list)
    defects: int = 0


@dataclass
class TouchSettings:
    families: List[str] = field(default_factory=lambda: list(special.CENTRED_FAMILIES))
    R: List[int] = field(default_factory=lambda: [4, 8])
    r: int = 1
    domains: int = 2
    control_q: Optional[float] = 4.0


@dataclass
class ChainSettings:
    N: int = 16
    ell: float = 2.0
    K: int = 3
    K_max: int = 10
    alpha: List[float] = field(default_factory=lambda: [0.25, 0.5])
    delta: float = 0.25


@dataclass
class ParafermionSettings:
    max_edges: int = 18
    q: List[float] = field(default_factory=lambda: [0.5, 1.0, 1.5, 2.0, 3.0, 4.0])
    control_dp: float = 0.05
    mc_samples: int = 0
    mc_size: int = 4


@dataclass
class ExtremalSettings:
    refinement: int = 32
    tol: float = DEFAULT_TOL


@dataclass
class OutputSettings:
    dir: str = "results"
    format: str = "csv"
    record_timing: bool = False


_SECTIONS = {
    "chain": ChainDefaults,
    "enumeration": EnumerationSettings,
    "crossing": CrossingSettings,
    "arms": ArmSettings,
    "touch": TouchSettings,
    "chains": ChainSettings,
    "parafermion": ParafermionSettings,
    "extremal": ExtremalSettings,
    "output": OutputSettings,
}


@dataclass
class ExperimentConfig:
    master_seed: int = 42
    q: List[float] = field(default_factory=lambda: [1.0, 2.0])
    chain: ChainDefaults = field(default_factory=ChainDefaults)
    enumeration: EnumerationSettings = field(default_factory=EnumerationSettings)
    crossing: CrossingSettings = field(default_factory=CrossingSettings)
    arms: ArmSettings = field(default_factory=ArmSettings)
    touch: TouchSettings = field(default_factory=TouchSettings)
    chains: ChainSettings = field(default_factory=ChainSettings)
    parafermion: ParafermionSettings = field(default_factory=ParafermionSettings)
    extremal: ExtremalSettings = field(default_factory=ExtremalSettings)
    truncation_factor: int = special.DEFAULT_TRUNCATION_FACTOR
    output: OutputSettings = field(default_factory=OutputSettings)
    workers: Optional[int] = None

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "ExperimentConfig":
        """Build and validate; missing keys keep their defaults, unknown keys are rejected."""
        known = {f.name for f in fields(cls)}
        kwargs: Dict[str, Any] = {}
        for key, value in data.items():
            if key == "paths":
                continue
            if key not in known:
                raise ConfigError(f"unknown config key {key!r}")
            section = _SECTIONS.get(key)
            if section is not None:
                if not isinstance(value, dict):
                    raise ConfigError(f"config section {key!r} must be an object")
                allowed = {f.name for f in fields(section)}
                extra = set(value) - allowed
                if extra:
                    raise ConfigError(f"unknown keys in {key!r}: {sorted(extra)}")
                kwargs[key] = section(**value)
            else:
                kwargs[key] = value
        cfg = cls(**kwargs)
        cfg.validate()
        return cfg

    def to_dict(self) -> Dict[str, Any]:
        data = asdict(self)
        data.pop("workers")
        return data

    def validate(self) -> None:
        if not self.q or any(not isinstance(q, (int, float)) or q <= 0 for q in self.q):
            raise ConfigError(f"q list must be non-empty and positive, got {self.q}")
        if self.chain.algorithm not in ALGORITHMS:
            raise ConfigError(f"chain.algorithm must be one of {ALGORITHMS}")
        if self.chain.samples < 1 or self.chain.chains < 1:
            raise ConfigError("chain.samples and chain.chains must be >= 1")
        if self.chain.burn_in < 0 or self.chain.thin < 0:
            raise ConfigError("chain.burn_in and chain.thin must be >= 0")
        for name, scales in (("arms.r", self.arms.r), ("arms.R", self.arms.R), ("arms.rho", self.arms.rho),
                             ("touch.R", self.touch.R)):
            if any(b <= a for a, b in zip(scales, scales[1:])):
                raise ConfigError(f"{name} must be increasing, got {scales}")
        if not self.arms.r or not self.arms.R:
            raise ConfigError("arms.r and arms.R must be non-empty")
        if self.arms.R[-1] < 2 * self.arms.r[0]:
            raise ConfigError(f"no scale pair with R/r >= 2 in r={self.arms.r}, R={self.arms.R}")
        if self.arms.mask not in ("full", "half", "quarter"):
            raise ConfigError(f"arms.mask must be full, half or quarter, got {self.arms.mask!r}")
        if self.truncation_factor < 2:
            raise ConfigError("truncation_factor must be >= 2")
        if self.chains.N < 1 or self.chains.ell <= 0 or self.chains.K < 1:
            raise ConfigError("chains.N, chains.ell and chains.K must be positive")
        if self.extremal.refinement < 1 or self.extremal.tol <= 0:
            raise ConfigError("extremal.refinement must be >= 1 and extremal.tol > 0")
        if self.output.format not in FORMATS:
            raise ConfigError(f"output.format must be one of {FORMATS}")
        if not self.touch.families or any(f not in special.CENTRED_FAMILIES for f in self.touch.families):
            raise ConfigError(f"touch.families must be drawn from {special.CENTRED_FAMILIES}")


# --- shared helpers -------------------------------------------------------

class _Clock:
    def __init__(self):
        self.started = time.perf_counter()

    @property
    def ms(self) -> float:
        return (time.perf_counter() - self.started) * 1000.0


def sample_point(cfg: ExperimentConfig, domain: Domain, bc: BoundaryPartition, q: float, seed: int,
                 p: Optional[float] = None) -> List[SampleStream]:
    """Independent chains for one parameter point; heat-bath below q = 1."""
    w = Weights(p=critical_p(q) if p is None else p, q=q)
    algorithm = cfg.chain.algorithm if q >= 1.0 else "heat-bath"
    spec = ChainSpec(domain, bc, w, seed, burn_in=cfg.chain.burn_in, thin=cfg.chain.thin, algorithm=algorithm)
    per_chain = max(1, cfg.chain.samples // cfg.chain.chains)
    return run_chains(spec, per_chain, n_chains=cfg.chain.chains, workers=cfg.workers)


def estimate(streams: Sequence[SampleStream], values: Callable[[SampleStream], np.ndarray]) -> MeanEstimate:
    """Average of the chain means; errors combine in quadrature."""
    parts = [mean_with_error(values(s)) for s in streams]
    m = len(parts)
    mean = math.fsum(p.mean for p in parts) / m
    err = math.sqrt(math.fsum(p.std_err ** 2 for p in parts)) / m
    return MeanEstimate(mean=mean, std_err=err, n_samples=sum(p.n_samples for p in parts),
                        tau=max(p.tau for p in parts))


def vectorised(event: Callable[[np.ndarray], np.ndarray]) -> Callable[[SampleStream], np.ndarray]:
    return lambda stream: np.asarray(event(stream.configs), dtype=float)


def per_config(fn: Callable[[Configuration], float]) -> Callable[[SampleStream], np.ndarray]:
    return lambda stream: stream.observable(fn)


def parse_quad(text: str) -> Tuple[str, Quad]:
    """Quad from 'rect:WxH', 'self-dual:n', 'l-shape:n', 'staircase:n[:seed]' or 'file:PATH'."""
    kind, _, arg = text.partition(":")
    try:
        if kind == "file":
            return text, read_quad_file(arg)
        if kind == "rect":
            w, h = arg.lower().split("x")
            return text, special.rect(int(w), int(h)).quad()
        if kind in ("self-dual", "l-shape"):
            return text, special.special_domain(kind, n=int(arg)).quad()
        if kind == "staircase":
            parts = arg.split(":")
            seed = int(parts[1]) if len(parts) > 1 else None
            return text, special.staircase_quad(int(parts[0]), seed=seed).quad()
    except ValueError as e:
        raise ConfigError(f"bad quad spec {text!r}: {e}") from e
    raise ConfigError(f"unknown quad spec {text!r}")


# --- crossing probabilities against extremal distance ---------------------

def exp_crossing_vs_modulus(cfg: ExperimentConfig,
                            quads: Optional[Sequence[Tuple[str, Quad]]] = None) -> List[EstimateRecord]:
    """Crossing probability of each quad and of its rotation, next to its extremal distance.

    Domains small enough for exhaustive enumeration get the exact value.
    """
    quads = list(quads) if quads is not None else [parse_quad(s) for s in cfg.crossing.quads]
    records: List[EstimateRecord] = []
    point = 0
    for label, base in quads:
        for arcs, quad in (("ab-cd", base), ("bc-da", base.rotated())):
            ell = extremal_distance(quad, cfg.extremal.refinement, cfg.extremal.tol)
            event = crossing_event(quad)
            for q in cfg.q:
                for bc_name in cfg.crossing.bcs:
                    seed = chain_seed(cfg.master_seed, point)
                    point += 1
                    clock = _Clock()
                    bc = BoundaryPartition.from_name(quad.domain, bc_name)
                    if quad.domain.n_edges <= min(cfg.crossing.exact_edges, cfg.enumeration.cap):
                        em = enumerate_measure(quad.domain, bc, Weights.critical(q), cap=cfg.enumeration.cap,
                                               chunk_bits=cfg.enumeration.chunk_bits, workers=cfg.workers)
                        est = MeanEstimate(mean=exact_probability(em, event, vectorized=True), std_err=0.0,
                                           n_samples=0, tau=0.0)
                        method = "exact"
                    else:
                        est = estimate(sample_point(cfg, quad.domain, bc, q, seed), vectorised(event))
                        method = "mc"
                    records.append(EstimateRecord(
                        experiment="crossing", q=q,
                        params={"quad": label, "arcs": arcs, "bc": bc_name, "ell": round(ell, 6), "method": method},
                        estimate=est.mean, std_err=est.std_err, n_samples=est.n_samples, seed=seed,
                        wall_ms=clock.ms,
                    ))
                    logger.debug(f"[experiments] crossing {label} {arcs} q={q} {bc_name}: "
                                 f"{est.mean:.4f} +- {est.std_err:.4f} (ell={ell:.4f})")
    logger.info(f"[experiments] crossing: {len(records)} points over {len(quads)} quads")
    return records


# --- arm exponents --------------------------------------------------------

def arm_domain(mask: str, R: int, factor: int) -> Domain:
    """Box of radius factor * R around the origin, cut to the half or quarter plane."""
    if mask == "half":
        return special.half_plane(R, factor).domain
    if mask == "quarter":
        return special.quarter_plane(R, factor).domain
    return special.box(factor * R).domain


def _arm_scales(cfg: ExperimentConfig) -> List[Tuple[int, int]]:
    pairs = {(r, R) for r in cfg.arms.r for R in cfg.arms.R if R >= 2 * r}
    for rho in cfg.arms.rho:
        for r, R in list(pairs):
            if r < rho < R:
                pairs.update({(r, rho), (rho, R)})
    return sorted(pairs)


def _ratio_error(values: Sequence[Tuple[float, float]], ratio: float) -> float:
    rel = math.fsum((e / v) ** 2 for v, e in values if v > 0)
    return abs(ratio) * math.sqrt(rel)


def exp_arm_exponents(cfg: ExperimentConfig) -> List[EstimateRecord]:
    """Arm-event frequencies over the (r, R) grid, power-law fits and quasi-multiplicativity ratios.

    Every annulus of one (q, sigma) point is evaluated on the same samples.
    """
    arms = cfg.arms
    pairs = _arm_scales(cfg)
    R_max = max(R for _, R in pairs)
    domain = arm_domain(arms.mask, R_max, cfg.truncation_factor)
    bc = BoundaryPartition.free(domain)
    records: List[EstimateRecord] = []
    point = 0
    for q in cfg.q:
        for label in arms.sigma:
            spec = ArmSpec.parse(label, mask=arms.mask, defects=arms.defects)
            r_min = minimal_radius(spec.sigma, arms.mask)
            usable = [(r, R) for r, R in pairs if r >= r_min]
            if not usable:
                raise ConfigError(f"sigma={spec.label} on the {arms.mask} mask needs r >= {r_min}")
            seed = chain_seed(cfg.master_seed, point)
            point += 1
            clock = _Clock()
            streams = sample_point(cfg, domain, bc, q, seed)
            freq: Dict[Tuple[int, int], MeanEstimate] = {}
            for r, R in usable:
                annulus = Annulus((0, 0), r, R, arms.mask)
                if spec.sigma == (1,) and not spec.defects:
                    values = vectorised(one_arm_event(domain, annulus))
                else:
                    values = per_config(lambda c, a=annulus: float(detect_arms(c, a, spec)))
                freq[(r, R)] = est = estimate(streams, values)
                records.append(EstimateRecord(
                    experiment="arm_frequency", q=q,
                    params={"sigma": spec.label, "mask": arms.mask, "r": r, "R": R},
                    estimate=est.mean, std_err=est.std_err, n_samples=est.n_samples, seed=seed,
                    wall_ms=clock.ms,
                ))
            records.extend(_arm_fits(q, spec, arms.mask, freq, seed))
            records.extend(_quasi_multiplicativity(q, spec, arms.mask, arms.rho, freq, seed))
            logger.info(f"[experiments] arms sigma={spec.label} q={q}: {len(usable)} annuli "
                        f"in {clock.ms:.0f} ms")
    return records


def _arm_fits(q: float, spec: ArmSpec, mask: str, freq: Dict[Tuple[int, int], MeanEstimate],
              seed: int) -> List[EstimateRecord]:
    out = []
    for r in sorted({r for r, _ in freq}):
        points = sorted((R, est) for (rr, R), est in freq.items() if rr == r)
        if len(points) < 2:
            continue
        fit = fit_power_law([R / r for R, _ in points], [e.mean for _, e in points],
                            [e.std_err for _, e in points])
        if fit.excluded:
            logger.warning(f"[experiments] sigma={spec.label} r={r}: zero counts at R/r={fit.excluded}, "
                           f"excluded from the fit")
        out.append(EstimateRecord(
            experiment="arm_exponent", q=q,
            params={"sigma": spec.label, "mask": mask, "r": r, "points": len(fit.used),
                    "excluded": [round(x, 6) for x in fit.excluded]},
            estimate=-fit.slope, std_err=fit.slope_err,
            n_samples=sum(e.n_samples for _, e in points), seed=seed,
        ))
    return out


def _quasi_multiplicativity(q: float, spec: ArmSpec, mask: str, rhos: Iterable[int],
                            freq: Dict[Tuple[int, int], MeanEstimate], seed: int) -> List[EstimateRecord]:
    out = []
    for rho in rhos:
        for (r, R), whole in sorted(freq.items()):
            inner, outer = freq.get((r, rho)), freq.get((rho, R))
            if inner is None or outer is None or whole.mean <= 0:
                continue
            ratio = inner.mean * outer.mean / whole.mean
            err = _ratio_error([(inner.mean, inner.std_err), (outer.mean, outer.std_err),
                                (whole.mean, whole.std_err)], ratio)
            out.append(EstimateRecord(
                experiment="quasi_multiplicativity", q=q,
                params={"sigma": spec.label, "mask": mask, "r": r, "rho": rho, "R": R},
                estimate=ratio, std_err=err, n_samples=whole.n_samples, seed=seed,
            ))
    return out


# --- boundary touching in R-centred domains -------------------------------

def exp_touching_boundary(cfg: ExperimentConfig) -> List[EstimateRecord]:
    """p(R) and touched r-box counts over families of R-centred domains, free boundary conditions.

    The control q (default 4) is swept as well and flagged in the records.
    """
    touch = cfg.touch
    qs = list(cfg.q)
    if touch.control_q is not None and touch.control_q not in qs:
        qs.append(touch.control_q)
    records: List[EstimateRecord] = []
    lows: Dict[float, Tuple[float, float]] = {}
    point = 0
    domain_index = 0
    for family in touch.families:
        for R in touch.R:
            for d in range(touch.domains):
                dom_seed = chain_seed(cfg.master_seed, DOMAIN_STREAM + domain_index)
                domain_index += 1
                domain = special.random_centred_domain(R, family, dom_seed)
                bc = BoundaryPartition.free(domain)
                for q in qs:
                    seed = chain_seed(cfg.master_seed, point)
                    point += 1
                    clock = _Clock()
                    streams = sample_point(cfg, domain, bc, q, seed)
                    p_hat = estimate(streams, per_config(lambda c: float(p_r_event(c, R))))
                    boxes = estimate(streams, per_config(lambda c: float(count_boundary_boxes(c, R, touch.r))))
                    params = {"family": family, "R": R, "domain": d, "control": q == touch.control_q
                              and q not in cfg.q}
                    records.append(EstimateRecord("touch_p", q, dict(params), p_hat.mean, p_hat.std_err,
                                                  p_hat.n_samples, seed, clock.ms))
                    records.append(EstimateRecord("touch_boxes", q, dict(params, r=touch.r), boxes.mean,
                                                  boxes.std_err, boxes.n_samples, seed, clock.ms))
                    if q not in lows or p_hat.mean < lows[q][0]:
                        lows[q] = (p_hat.mean, p_hat.std_err)
                    logger.debug(f"[experiments] touch {family} R={R} #{d} q={q}: p={p_hat.mean:.4f}")
    for q in qs:
        low, err = lows[q]
        records.append(EstimateRecord("touch_p_min", q, {"control": q == touch.control_q and q not in cfg.q},
                                      low, err, 0, cfg.master_seed))
        logger.info(f"[experiments] touch q={q}: min p(R) = {low:.4f}")
    return records


# --- chains of clusters ---------------------------------------------------

def exp_chains(cfg: ExperimentConfig) -> List[EstimateRecord]:
    """Hamming distance to a left-right crossing of [0, ell N] x [0, N] and the G, H, F events."""
    ch = cfg.chains
    width = int(math.floor(ch.ell * ch.N))
    sd = special.rect(width, ch.N)
    quad = sd.quad()
    bc = BoundaryPartition.free(sd.domain)
    records: List[EstimateRecord] = []
    for point, q in enumerate(cfg.q):
        seed = chain_seed(cfg.master_seed, point)
        clock = _Clock()
        streams = sample_point(cfg, sd.domain, bc, q, seed)
        base = {"N": ch.N, "ell": ch.ell}

        ks: Dict[int, np.ndarray] = {}
        diam: Dict[int, np.ndarray] = {}
        for s in streams:
            pairs = [hamming_crossing(c, quad) for c in s]
            ks[s.chain_index] = np.array([k for k, _ in pairs], dtype=float)
            diam[s.chain_index] = np.array([chain.min_diameter for _, chain in pairs], dtype=float)

        k_est = estimate(streams, lambda s: ks[s.chain_index])
        records.append(EstimateRecord("chains_k_mean", q, dict(base), k_est.mean, k_est.std_err,
                                      k_est.n_samples, seed, clock.ms))
        for K in range(ch.K_max + 1):
            est = estimate(streams, lambda s, K=K: (ks[s.chain_index] <= K).astype(float))
            records.append(EstimateRecord("chains_k_cdf", q, dict(base, K=K), est.mean, est.std_err,
                                          est.n_samples, seed, clock.ms))
        d_est = estimate(streams, lambda s: diam[s.chain_index])
        records.append(EstimateRecord("chains_min_diameter", q, dict(base), d_est.mean, d_est.std_err,
                                      d_est.n_samples, seed, clock.ms))

        for alpha in ch.alpha:
            flags = {s.chain_index: [chain_events(c, ch.N, ch.ell, ch.K, alpha, ch.delta) for c in s]
                     for s in streams}
            for name in ("G", "H", "F"):
                est = estimate(streams, lambda s, n=name: np.array(
                    [float(getattr(e, n)) for e in flags[s.chain_index]]))
                records.append(EstimateRecord("chains_event", q,
                                              dict(base, event=name, K=ch.K, alpha=alpha, delta=ch.delta),
                                              est.mean, est.std_err, est.n_samples, seed, clock.ms))
        logger.info(f"[experiments] chains q={q}: mean k = {k_est.mean:.3f} in {clock.ms:.0f} ms")
    return records


# --- parafermionic observable ---------------------------------------------

@dataclass(frozen=True)
class DobrushinCase:
    label: str
    domain: Domain
    a: Point
    b: Point

    @property
    def free_edges(self) -> int:
        return self.domain.n_edges - len(medial_graph(self.domain, (self.a, self.b)).wired_edges)


def dobrushin_suite(max_edges: int) -> List[DobrushinCase]:
    """Small Dobrushin domains with at most max_edges edges outside the wired arc."""
    cases: List[DobrushinCase] = []
    for w in range(1, 5):
        for h in range(1, w + 1):
            dom = special.rect(w, h).domain
            cases.append(DobrushinCase(f"rect{w}x{h}-corner", dom, (w, 0), (0, h)))
            cases.append(DobrushinCase(f"rect{w}x{h}-edge", dom, (1, 0), (0, 0)))
    for m in (1, 2):
        for ell in (1, 2):
            for closing in ("staircase", "box"):
                sd = special.corner(m, ell, closing)
                cases.append(DobrushinCase(f"corner{m}x{ell}-{closing}", sd.domain, sd.a, sd.b))
    return [c for c in cases if c.free_edges <= max_edges]


def exp_parafermion_verify(cfg: ExperimentConfig,
                           cases: Optional[Sequence[DobrushinCase]] = None) -> List[EstimateRecord]:
    """Largest contour sum and vertex residual of the exact observable, at p_c and at a shifted p.

    Domains above the enumeration cap are skipped with a note record.
    """
    pf = cfg.parafermion
    cases = list(cases) if cases is not None else dobrushin_suite(pf.max_edges)
    histograms = []
    records: List[EstimateRecord] = []
    for case in cases:
        try:
            histograms.append((case, strand_histogram(case.domain, case.a, case.b, cap=cfg.enumeration.cap,
                                                      workers=cfg.workers)))
        except CapExceeded as e:
            logger.warning(f"[experiments] parafermion: skipping {case.label}: {e}")
            records.append(EstimateRecord("parafermion_skip", 0.0,
                                          {"domain": case.label, "note": f"cap exceeded ({e.required} edges)"}))
    for q in pf.q:
        for dp in (0.0, pf.control_dp):
            p = critical_p(q) + dp
            if not 0.0 < p < 1.0:
                continue
            if dp > 0.0 and math.isclose(sigma(q), 1.0):
                # spin 1 makes the vertex relation hold at every p
                logger.info(f"[experiments] parafermion q={q}: no off-critical control, spin is 1")
                records.append(EstimateRecord("parafermion_skip", q, {"dp": dp, "note": "spin 1, control degenerate"}))
                continue
            clock = _Clock()
            worst_contour, worst_vertex = 0.0, 0.0
            where_contour, where_vertex = "", ""
            for case, hist in histograms:
                F = hist.field(q, p)
                c = abs(contour_sum(F))
                v = max((abs(vertex_relation_residual(F, m)) for m in F.graph.interior), default=0.0)
                if c >= worst_contour:
                    worst_contour, where_contour = c, case.label
                if v >= worst_vertex:
                    worst_vertex, where_vertex = v, case.label
            params = {"dp": dp, "domains": len(histograms)}
            records.append(EstimateRecord("parafermion_contour", q, dict(params, worst=where_contour),
                                          worst_contour, 0.0, 0, cfg.master_seed, clock.ms))
            records.append(EstimateRecord("parafermion_vertex", q, dict(params, worst=where_vertex),
                                          worst_vertex, 0.0, 0, cfg.master_seed, clock.ms))
            logger.info(f"[experiments] parafermion q={q} dp={dp}: max |contour| = {worst_contour:.3e}, "
                        f"max vertex residual = {worst_vertex:.3e}")
    if pf.mc_samples > 0:
        records.extend(_parafermion_mc(cfg))
    return records


def _parafermion_mc(cfg: ExperimentConfig) -> List[EstimateRecord]:
    pf = cfg.parafermion
    n = pf.mc_size
    sd = special.rect(n, n)
    a, b = (n, 0), (0, n)
    bc = BoundaryPartition.dobrushin(sd.domain, a, b)
    mc_cfg = ExperimentConfig.from_dict(dict(cfg.to_dict(), chain=dict(asdict(cfg.chain), samples=pf.mc_samples)))
    mc_cfg.workers = cfg.workers
    out = []
    for point, q in enumerate(pf.q):
        seed = chain_seed(cfg.master_seed, point)
        clock = _Clock()
        streams = sample_point(mc_cfg, sd.domain, bc, q, seed)
        configs = np.concatenate([s.configs for s in streams])
        F = observable_mc(configs, sd.domain, a, b, Weights.critical(q))
        residual = abs(contour_sum(F))
        total = int(configs.shape[0])
        out.append(EstimateRecord("parafermion_mc", q, {"size": n, "bound": 5.0 / math.sqrt(total)},
                                  residual, float("nan"), total, seed, clock.ms))
        logger.info(f"[experiments] parafermion MC q={q}: |contour| = {residual:.3e} from {total} samples")
    return out


RUNNERS: Dict[str, Callable[[ExperimentConfig], List[EstimateRecord]]] = {
    "crossing": exp_crossing_vs_modulus,
    "arms": exp_arm_exponents,
    "touch": exp_touching_boundary,
    "chains": exp_chains,
    "parafermion": exp_parafermion_verify,
}
