import os
import tempfile
import unittest
from pathlib import Path

import numpy as np

from src.errors import InvalidParams, UnsupportedQ
from src.lattice.domain import Domain, loop_from_faces, rect_loop
from src.lattice import special
from src.managers.enumeration import enumerate_measure
from src.managers.sampler import (
    ChainSpec,
    autocorrelation,
    chayes_machta_step,
    endpoints_connected_without,
    heat_bath_step,
    run_chain,
    run_chains,
)
from src.model.measure import BoundaryPartition, Configuration, Weights
from src.utils.formats import read_sample_dump
from src.utils.rng import make_rng
from src.utils.stats import tolerances

SLOW = bool(os.environ.get("RCMLAB_SLOW"))


def unit_square() -> Domain:
    return Domain(rect_loop(0, 0, 1, 1))


def config_indices(configs: np.ndarray) -> np.ndarray:
    return (configs.astype(np.int64) << np.arange(configs.shape[1], dtype=np.int64)).sum(axis=1)


def total_variation(configs: np.ndarray, probs: np.ndarray) -> float:
    counts = np.bincount(config_indices(configs), minlength=probs.size)
    return 0.5 * float(np.abs(counts / counts.sum() - probs).sum())


def small_domains(max_edges: int) -> list:
    """Polyomino domains with at most max_edges edges, one per translation class."""
    shapes = {frozenset({(0, 0)})}
    grown = set(shapes)
    while grown:
        nxt = set()
        for faces in grown:
            for (x, y) in faces:
                for f in ((x + 1, y), (x - 1, y), (x, y + 1), (x, y - 1)):
                    if f in faces:
                        continue
                    new = faces | {f}
                    x0, y0 = min(i for i, _ in new), min(j for _, j in new)
                    new = frozenset((i - x0, j - y0) for i, j in new)
                    if new not in shapes and Domain(loop_from_faces(new)).n_edges <= max_edges:
                        nxt.add(new)
        shapes |= nxt
        grown = nxt
    return [Domain(loop_from_faces(faces)) for faces in sorted(shapes, key=sorted)]


class HeatBathKernelTests(unittest.TestCase):
    def test_small_domain_catalogue(self):
        sizes = sorted(d.n_edges for d in small_domains(10))
        self.assertEqual(sizes, [4, 7, 7] + [10] * 6)

    def test_single_edge_update_preserves_measure(self):
        tol = tolerances()["heat_bath_kernel"]["l1"]
        weights = [Weights.critical(q) for q in (1.0, 1.5, 2.0, 3.0, 4.0)] + [Weights(0.4, 0.5), Weights(0.7, 4.0)]
        for dom in small_domains(tolerances()["heat_bath_kernel"]["max_edges"]):
            n = 1 << dom.n_edges
            index = np.arange(n, dtype=np.int64)
            configs = [Configuration.from_index(dom, i).bits for i in range(n)]
            a, b = dom.boundary[0], dom.boundary[len(dom.boundary) // 2]
            for bc in (BoundaryPartition.free(dom), BoundaryPartition.wired(dom),
                       BoundaryPartition.dobrushin(dom, a, b)):
                measures = [enumerate_measure(dom, bc, w).probabilities() for w in weights]
                for e in range(dom.n_edges):
                    connected = np.array([endpoints_connected_without(dom, bits, bc, e) for bits in configs])
                    up, down = index | (1 << e), index & ~(1 << e)
                    for w, pi in zip(weights, measures):
                        p_open = np.where(connected, w.open_probability(True), w.open_probability(False))
                        moved = np.zeros(n)
                        np.add.at(moved, up, pi * p_open)
                        np.add.at(moved, down, pi * (1.0 - p_open))
                        with self.subTest(domain=repr(dom), bc=bc.name, q=w.q, p=w.p, e=e):
                            self.assertLess(np.abs(moved - pi).sum(), tol)

    def test_connectivity_without_edge(self):
        dom = unit_square()
        free = BoundaryPartition.free(dom)
        self.assertTrue(endpoints_connected_without(dom, np.ones(4, dtype=bool), free, 0))
        only = np.zeros(4, dtype=bool)
        only[0] = True
        self.assertFalse(endpoints_connected_without(dom, only, free, 0))
        self.assertTrue(endpoints_connected_without(dom, only, BoundaryPartition.wired(dom), 0))

    def test_step_validation(self):
        dom = unit_square()
        c = Configuration.empty(dom)
        with self.assertRaises(InvalidParams):
            heat_bath_step(c, BoundaryPartition.free(dom), Weights(0.5, 1.0), make_rng(1), 4)
        with self.assertRaises(UnsupportedQ):
            chayes_machta_step(c, BoundaryPartition.free(dom), Weights(0.5, 0.5), make_rng(1))


class ChainTests(unittest.TestCase):
    def test_chayes_machta_matches_exact_measure(self):
        tol = tolerances()["chayes_machta_tv"]
        dom = unit_square()
        bc = BoundaryPartition.free(dom)
        w = Weights.critical(2.0)
        probs = enumerate_measure(dom, bc, w).probabilities()
        spec = ChainSpec(dom, bc, w, seed=11, burn_in=50)
        stream = run_chain(spec, tol["reduced_steps"])
        self.assertLess(total_variation(stream.configs, probs), tol["reduced_tv"])

    def test_heat_bath_below_one(self):
        tol = tolerances()["chayes_machta_tv"]
        dom = unit_square()
        bc = BoundaryPartition.wired(dom)
        w = Weights.critical(0.5)
        probs = enumerate_measure(dom, bc, w).probabilities()
        spec = ChainSpec(dom, bc, w, seed=5, burn_in=20, algorithm="heat-bath")
        stream = run_chain(spec, tol["reduced_steps"])
        self.assertLess(total_variation(stream.configs, probs), tol["reduced_tv"])

    @unittest.skipUnless(SLOW, "set RCMLAB_SLOW=1 for long statistical runs")
    def test_chayes_machta_long_run(self):
        tol = tolerances()["chayes_machta_tv"]
        dom = special.rect(2, 1).domain
        bc = BoundaryPartition.dobrushin(dom, (2, 0), (0, 1))
        w = Weights.critical(3.0)
        probs = enumerate_measure(dom, bc, w).probabilities()
        stream = run_chain(ChainSpec(dom, bc, w, seed=2024), tol["steps"])
        self.assertLess(total_variation(stream.configs, probs), tol["tv"])

    def test_spec_validation(self):
        dom = unit_square()
        bc = BoundaryPartition.free(dom)
        with self.assertRaises(UnsupportedQ):
            ChainSpec(dom, bc, Weights(0.5, 0.5), seed=1)
        with self.assertRaises(InvalidParams):
            ChainSpec(dom, bc, Weights(0.5, 2.0), seed=1, algorithm="metropolis")
        with self.assertRaises(InvalidParams):
            ChainSpec(dom, bc, Weights(0.5, 2.0), seed=1, burn_in=-1)
        with self.assertRaises(InvalidParams):
            run_chain(ChainSpec(dom, bc, Weights(0.5, 2.0), seed=1), -1)

    def test_chains_are_reproducible(self):
        dom = special.rect(2, 2).domain
        spec = ChainSpec(dom, BoundaryPartition.free(dom), Weights.critical(2.0), seed=9, burn_in=5, thin=2)
        one = run_chains(spec, 30, n_chains=3, workers=1)
        two = run_chains(spec, 30, n_chains=3, workers=3)
        for a, b in zip(one, two):
            np.testing.assert_array_equal(a.configs, b.configs)
        self.assertEqual([s.chain_index for s in one], [0, 1, 2])
        self.assertFalse(np.array_equal(one[0].configs, one[1].configs))
        self.assertEqual(one[0].sweeps.tolist()[:3], [7, 9, 11])

    def test_spec_json_round_trip(self):
        sd = special.rect(2, 1)
        dom = sd.domain
        spec = ChainSpec(dom, BoundaryPartition.dobrushin(dom, (2, 0), (0, 1)), Weights(0.6, 2.0), seed=3,
                         burn_in=7, thin=2, algorithm="heat-bath")
        again = ChainSpec.from_json(spec.to_json())
        self.assertEqual(again.domain.edges, dom.edges)
        self.assertEqual(again.bc.blocks, spec.bc.blocks)
        self.assertEqual((again.seed, again.burn_in, again.thin, again.algorithm), (3, 7, 2, "heat-bath"))
        self.assertEqual(again.weights, spec.weights)

    def test_dump(self):
        dom = unit_square()
        spec = ChainSpec(dom, BoundaryPartition.free(dom), Weights(0.5, 1.0), seed=1, burn_in=0)
        stream = run_chain(spec, 5)
        with tempfile.TemporaryDirectory() as tmp:
            path = Path(tmp) / "samples.txt"
            self.assertEqual(stream.dump(path), 5)
            rows = read_sample_dump(path)
        self.assertEqual([s for s, _ in rows], [1, 2, 3, 4, 5])
        np.testing.assert_array_equal(np.array([b for _, b in rows]), stream.configs)

    def test_autocorrelation_of_open_edges(self):
        dom = special.rect(2, 2).domain
        spec = ChainSpec(dom, BoundaryPartition.free(dom), Weights.critical(2.0), seed=4, burn_in=10)
        stream = run_chain(spec, 400)
        est = autocorrelation(stream, lambda c: c.n_open())
        self.assertFalse(est.flagged)
        self.assertGreaterEqual(est.tau, 0.0)


if __name__ == "__main__":
    unittest.main()
