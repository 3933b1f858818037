import itertools
import math
import unittest

import numpy as np

from src.errors import InvalidMarks, InvalidParams, SizeMismatch
from src.lattice.domain import Annulus, Domain, rect_loop
from src.lattice import special
from src.managers.enumeration import enumerate_measure
from src.model.connectivity import crossing_event
from src.model.events import increasing_events, indicator_matrix
from src.model.measure import (
    BoundaryPartition,
    Configuration,
    Weights,
    cluster_count,
    cluster_labels,
    critical_p,
    exact_expectation,
    exact_probability,
    index_bits,
    log_weight,
    weight,
)
from src.utils.stats import tolerances


def unit_square() -> Domain:
    return Domain(rect_loop(0, 0, 1, 1))


class WeightsTests(unittest.TestCase):
    def test_critical_point(self):
        self.assertAlmostEqual(critical_p(1.0), 0.5)
        self.assertAlmostEqual(critical_p(4.0), 2.0 / 3.0)
        w = Weights.critical(2.0)
        # self-dual point: p / (1 - p) = sqrt(q)
        self.assertAlmostEqual(w.edge_factor, math.sqrt(2.0))

    def test_rejects_bad_parameters(self):
        for p, q in ((0.0, 1.0), (1.0, 1.0), (0.5, 0.0), (0.5, -2.0)):
            with self.assertRaises(InvalidParams):
                Weights(p, q)
        with self.assertRaises(InvalidParams):
            critical_p(0.0)

    def test_open_probability(self):
        w = Weights(0.5, 2.0)
        self.assertAlmostEqual(w.open_probability(True), 0.5)
        self.assertAlmostEqual(w.open_probability(False), 1.0 / 3.0)


class ConfigurationTests(unittest.TestCase):
    def test_size_mismatch(self):
        with self.assertRaises(SizeMismatch):
            Configuration(unit_square(), np.zeros(3, dtype=bool))

    def test_index_and_string(self):
        dom = unit_square()
        c = Configuration.from_index(dom, 0b0101)
        self.assertEqual(c.to_string(), "1010")
        self.assertEqual(Configuration.from_string(dom, "1010").bits.tolist(), c.bits.tolist())
        self.assertEqual(c.n_open(), 2)
        self.assertEqual(c.with_edge(1, True).n_open(), 3)
        with self.assertRaises(InvalidParams):
            Configuration.from_edges(dom, [((0, 0), (2, 0))])

    def test_cluster_counts_on_unit_square(self):
        dom = unit_square()
        empty = Configuration.empty(dom)
        self.assertEqual(cluster_count(empty, BoundaryPartition.free(dom)), 4)
        self.assertEqual(cluster_count(empty, BoundaryPartition.wired(dom)), 1)
        self.assertEqual(cluster_count(Configuration.full(dom), BoundaryPartition.free(dom)), 1)

    def test_weight_of_empty_configuration(self):
        dom = unit_square()
        w = Weights(0.5, 2.0)
        self.assertAlmostEqual(weight(Configuration.empty(dom), BoundaryPartition.free(dom), w), 16.0)
        full = Configuration.full(dom)
        self.assertAlmostEqual(log_weight(full, BoundaryPartition.free(dom), w), math.log(2.0))

    def test_cluster_labels_match_union_find(self):
        dom = special.rect(3, 2).domain
        rng = np.random.default_rng(5)
        for bc in (BoundaryPartition.free(dom), BoundaryPartition.wired(dom),
                   BoundaryPartition.dobrushin(dom, (3, 0), (0, 2))):
            for _ in range(25):
                bits = rng.random(dom.n_edges) < 0.5
                n, labels = cluster_labels(dom, bits, bc)
                self.assertEqual(n, cluster_count(Configuration(dom, bits), bc))
                self.assertEqual(labels.shape, (dom.n_vertices,))


class BoundaryPartitionTests(unittest.TestCase):
    def test_named_partitions(self):
        dom = special.rect(2, 1).domain
        self.assertEqual(BoundaryPartition.free(dom).wired_blocks(), [])
        self.assertEqual(len(BoundaryPartition.wired(dom).wired_blocks()), 1)
        dob = BoundaryPartition.from_name(dom, "dobrushin", ((2, 0), (0, 1)))
        self.assertEqual(len(dob.wired_blocks()[0]), 4)
        with self.assertRaises(InvalidMarks):
            BoundaryPartition.from_name(dom, "dobrushin")
        with self.assertRaises(InvalidParams):
            BoundaryPartition.from_name(dom, "periodic")

    def test_blocks_must_be_disjoint(self):
        dom = special.rect(2, 1).domain
        with self.assertRaises(InvalidParams):
            BoundaryPartition(dom, [[(0, 0), (1, 0)], [(1, 0), (2, 0)]])
        with self.assertRaises(InvalidMarks):
            BoundaryPartition(dom, [[(5, 5)]])


class ExactMeasureTests(unittest.TestCase):
    def test_percolation_partition_function(self):
        dom = unit_square()
        for p in (0.3, 0.5, 0.8):
            w = Weights(p, 1.0)
            em = enumerate_measure(dom, BoundaryPartition.free(dom), w)
            x = p / (1 - p)
            self.assertAlmostEqual(em.log_z, 4 * math.log1p(x), places=12)

    def test_brute_force_partition_function(self):
        dom = special.rect(2, 1).domain
        w = Weights(0.55, 2.5)
        for bc in (BoundaryPartition.free(dom), BoundaryPartition.wired(dom)):
            total = 0.0
            for bits in itertools.product((False, True), repeat=dom.n_edges):
                total += weight(Configuration(dom, np.array(bits)), bc, w)
            em = enumerate_measure(dom, bc, w)
            self.assertAlmostEqual(em.log_z, math.log(total), places=10)
            self.assertAlmostEqual(float(em.probabilities().sum()), 1.0, places=12)

    def test_self_dual_crossing_is_one_half(self):
        tol = tolerances()["self_dual_crossing"]["exact"]
        for n in (1, 2):
            quad = special.self_dual_rect(n).quad()
            em = enumerate_measure(quad.domain, BoundaryPartition.free(quad.domain), Weights.critical(1.0))
            prob = exact_probability(em, crossing_event(quad), vectorized=True)
            self.assertLess(abs(prob - 0.5), tol)

    def test_vectorised_and_scalar_events_agree(self):
        quad = special.rect(2, 1).quad()
        em = enumerate_measure(quad.domain, BoundaryPartition.free(quad.domain), Weights.critical(2.0))
        event = crossing_event(quad)
        vec = exact_probability(em, event, vectorized=True)
        scalar = exact_probability(em, lambda c: bool(event(c.bits[None, :])[0]))
        self.assertAlmostEqual(vec, scalar, places=12)

    def test_expected_open_edges(self):
        dom = unit_square()
        w = Weights(0.3, 1.0)
        em = enumerate_measure(dom, BoundaryPartition.free(dom), w)
        mean_open = exact_expectation(em, lambda bits: bits.sum(axis=1))
        self.assertAlmostEqual(float(mean_open), 4 * 0.3, places=12)

    def test_fkg_and_boundary_comparison(self):
        margin = tolerances()["monotonicity"]["margin"]
        quad = special.rect(2, 2).quad()
        dom = quad.domain
        events = increasing_events(quad, annulus=Annulus((1, 1), 0, 1))
        self.assertEqual(len(events), dom.n_edges + 3)
        indicators = indicator_matrix(events, index_bits(np.arange(1 << dom.n_edges, dtype=np.int64), dom.n_edges))
        self.assertTrue(indicators.any(axis=0).all())
        self.assertFalse(indicators.all(axis=0).any())
        ind = indicators.astype(float)
        for q in (1.0, 1.5, 2.0, 4.0):
            w = Weights.critical(q)
            marginals = {}
            for bc in (BoundaryPartition.free(dom), BoundaryPartition.wired(dom)):
                probs = enumerate_measure(dom, bc, w).probabilities()
                p = probs @ ind
                joint = ind.T @ (probs[:, None] * ind)
                cov = joint - np.outer(p, p)
                with self.subTest(q=q, bc=bc.name):
                    self.assertGreaterEqual(float(cov.min()), margin)
                marginals[bc.name] = p
            with self.subTest(q=q):
                self.assertGreaterEqual(float((marginals["wired"] - marginals["free"]).min()), margin)
        self.assertAlmostEqual(exact_probability(enumerate_measure(dom, BoundaryPartition.free(dom), w),
                                                 events["one-arm"], vectorized=True),
                               float(marginals["free"][list(events).index("one-arm")]), places=12)

    def test_to_json(self):
        dom = unit_square()
        em = enumerate_measure(dom, BoundaryPartition.wired(dom), Weights(0.4, 3.0))
        data = em.to_json()
        self.assertEqual(data["edges"], 4)
        self.assertEqual(data["q"], 3.0)
        self.assertAlmostEqual(data["logZ"], em.log_z)


if __name__ == "__main__":
    unittest.main()
