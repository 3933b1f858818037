import cmath
import csv
import math
import tempfile
import unittest
from pathlib import Path

import numpy as np

from src.actions import dobrushin_suite
from src.errors import InvalidContour, NotInterior, NotOnPath, OutOfRange
from src.lattice.domain import Domain, rect_loop
from src.lattice.medial import medial_graph
from src.lattice import special
from src.managers.sampler import ChainSpec, run_chain
from src.model.measure import BoundaryPartition, Configuration, Weights, critical_p, weight
from src.model.parafermion import (
    StrandTracer,
    beta_pairs,
    contour_sum,
    diagonal_vertices,
    free_loops,
    loop_representation,
    observable_exact,
    observable_mc,
    sigma,
    vertex_relation_residual,
)
from src.utils.rng import make_rng
from src.utils.stats import tolerances


class SigmaTests(unittest.TestCase):
    def test_values(self):
        self.assertAlmostEqual(sigma(4.0), 1.0)
        self.assertAlmostEqual(sigma(2.0), 0.5)
        self.assertAlmostEqual(sigma(1.0), 1.0 / 3.0)
        with self.assertRaises(OutOfRange):
            sigma(4.5)


class LoopTests(unittest.TestCase):
    def test_loops_close_with_full_turn(self):
        dom = special.rect(3, 2).domain
        rng = make_rng(4)
        for _ in range(10):
            config = Configuration(dom, rng.random(dom.n_edges) < 0.5)
            for edges, turns in free_loops(config):
                self.assertIn(sum(turns), (4, -4))
                self.assertEqual(len(set(edges)), len(edges))

    def test_exploration_path(self):
        sd = special.corner(2, 2, "box")
        dom, a, b = sd.domain, sd.a, sd.b
        graph = medial_graph(dom, (a, b))
        tracer = StrandTracer(graph, dom, np.arange(dom.n_edges, dtype=np.int64))
        rng = make_rng(6)
        for _ in range(15):
            config = Configuration(dom, rng.random(dom.n_edges) < 0.5)
            rep = loop_representation(config, a, b)
            self.assertEqual(rep.strand[0], graph.e_a)
            self.assertEqual(rep.strand[-1], graph.e_b)
            self.assertEqual(rep.winding(graph.e_b), 0)
            counts = rep.edge_multiplicity()
            self.assertTrue(all(c == 1 for c in counts.values()))
            self.assertTrue(set(graph.edges) <= set(counts))

            ids, cum = tracer.trace(config.bits[None, :])
            traced = [tracer.edge_of(i) for i in ids[:, 0].tolist() if i >= 0]
            self.assertEqual(traced, rep.strand)
            for i, e in enumerate(traced):
                self.assertEqual(int(cum[-1, 0] - cum[i, 0]), rep.winding(e))

        off_path = next(e for e in graph.edges if not rep.on_path(e))
        with self.assertRaises(NotOnPath):
            rep.winding(off_path)


class ObservableTests(unittest.TestCase):
    def test_contour_identity_at_criticality(self):
        tol = tolerances()["contour_identity"]["max_abs"]
        vtol = tolerances()["vertex_relation"]["max_abs"]
        for case in dobrushin_suite(18):
            for q in (0.5, 1.0, 1.5, 2.0, 3.0, 4.0):
                F = observable_exact(case.domain, case.a, case.b, q)
                with self.subTest(case=case.label, q=q):
                    self.assertLess(abs(contour_sum(F)), tol)
                    worst = max(abs(vertex_relation_residual(F, v)) for v in F.graph.interior)
                    self.assertLess(worst, vtol)

    def test_boundary_values(self):
        for case in dobrushin_suite(10):
            F = observable_exact(case.domain, case.a, case.b, 2.0)
            self.assertAlmostEqual(F[F.graph.e_b], 1.0 + 0j, places=12)
            self.assertAlmostEqual(abs(F[F.graph.e_a]), 1.0, places=12)
            self.assertLessEqual(F.max_abs(), 1.0 + 1e-12)

    def test_relation_fails_off_criticality(self):
        floor = tolerances()["contour_sensitivity"]["min_abs"]
        dp = tolerances()["contour_sensitivity"]["dp"]
        case = next(c for c in dobrushin_suite(12) if c.label == "rect2x2-corner")
        F = observable_exact(case.domain, case.a, case.b, 2.0, p=critical_p(2.0) + dp)
        worst = max(abs(vertex_relation_residual(F, v)) for v in F.graph.interior)
        self.assertGreater(worst, floor)

    def test_sub_contours(self):
        case = next(c for c in dobrushin_suite(12) if c.label == "rect2x2-corner")
        F = observable_exact(case.domain, case.a, case.b, 3.0)
        top = max(m[0] + m[1] for m in F.graph.interior)
        inside = diagonal_vertices(F.graph, top)
        self.assertTrue(inside)
        self.assertLess(abs(contour_sum(F, inside)), tolerances()["contour_identity"]["max_abs"])
        with self.assertRaises(InvalidContour):
            contour_sum(F, [])
        with self.assertRaises(InvalidContour):
            contour_sum(F, [F.graph.e_a[0]])
        with self.assertRaises(NotInterior):
            vertex_relation_residual(F, F.graph.e_a[0])

    def test_relation_fails_off_criticality_across_suite(self):
        floor = tolerances()["contour_sensitivity"]["min_abs"]
        dp = tolerances()["contour_sensitivity"]["dp"]
        cases = [c for c in dobrushin_suite(18) if len(medial_graph(c.domain, (c.a, c.b)).interior) > 1]
        for q in (0.5, 1.0, 1.5, 2.0, 3.0):
            worst = 0.0
            for case in cases:
                F = observable_exact(case.domain, case.a, case.b, q, p=critical_p(q) + dp)
                worst = max(worst, max(abs(vertex_relation_residual(F, v)) for v in F.graph.interior))
            with self.subTest(q=q):
                self.assertGreater(worst, floor)

    def test_beta_pairs(self):
        sd = special.corner(2, 2, "box")
        F = observable_exact(sd.domain, sd.a, sd.b, 2.0)
        pairs = beta_pairs(F)
        self.assertTrue(pairs)
        for pair in pairs:
            self.assertIn(pair.first, F.graph.edge_set)
            self.assertIn(pair.second, F.graph.edge_set)
            self.assertLess(pair.gap, 1e-12)

    def test_monte_carlo_matches_exact(self):
        dom, a, b = special.rect(2, 1).domain, (2, 0), (0, 1)
        w = Weights.critical(2.0)
        exact = observable_exact(dom, a, b, 2.0)
        spec = ChainSpec(dom, BoundaryPartition.dobrushin(dom, a, b), w, seed=13, burn_in=100)
        mc = observable_mc(run_chain(spec, 10_000).configs, dom, a, b, w)
        self.assertEqual(mc.n_samples, 10_000)
        for e, value in exact.values.items():
            self.assertLess(abs(mc[e] - value), 0.06, e)

    def test_write_csv(self):
        case = dobrushin_suite(6)[0]
        F = observable_exact(case.domain, case.a, case.b, 1.0)
        with tempfile.TemporaryDirectory() as tmp:
            path = Path(tmp) / "field.csv"
            n = F.write_csv(path)
            with path.open(encoding="utf-8") as fh:
                rows = list(csv.reader(fh))
        self.assertEqual(rows[0], ["x1", "y1", "x2", "y2", "re", "im"])
        self.assertEqual(len(rows) - 1, n)
        self.assertTrue(all(math.isfinite(float(r[4])) for r in rows[1:]))

class CoincidentMarksTests(unittest.TestCase):
    """Unit square with a = b = (0, 0): every edge is free."""

    def setUp(self):
        self.dom = Domain(rect_loop(0, 0, 1, 1))
        self.a = (0, 0)

    def test_marked_edges(self):
        graph = medial_graph(self.dom, (self.a, self.a))
        self.assertEqual(graph.e_a, ((0, -1), (1, 0)))
        self.assertEqual(graph.e_b, ((0, 1), (-1, 0)))
        self.assertEqual(graph.wired_edges, frozenset())

    def test_empty_configuration_strand(self):
        rep = loop_representation(Configuration.empty(self.dom), self.a, self.a)
        self.assertEqual(rep.strand, [((0, -1), (1, 0)), ((1, 0), (0, 1)), ((0, 1), (-1, 0))])

    def test_identity_and_exit_value(self):
        for q in (0.5, 1.0, 1.5, 2.0, 3.0, 4.0):
            F = observable_exact(self.dom, self.a, self.a, q)
            with self.subTest(q=q):
                self.assertAlmostEqual(F[F.graph.e_b], 1.0 + 0j, places=12)
                self.assertLess(abs(contour_sum(F)), 1e-12)

    def test_field_matches_per_configuration_trace(self):
        q = 2.0
        w = Weights.critical(q)
        s = sigma(q)
        bc = BoundaryPartition.dobrushin(self.dom, self.a, self.a)
        sums, z = {}, 0.0
        for index in range(1 << self.dom.n_edges):
            config = Configuration.from_index(self.dom, index)
            wt = weight(config, bc, w)
            z += wt
            rep = loop_representation(config, self.a, self.a)
            for e in rep.strand:
                sums[e] = sums.get(e, 0j) + wt * cmath.exp(1j * s * rep.winding(e) * math.pi / 2.0)
        F = observable_exact(self.dom, self.a, self.a, q)
        self.assertEqual(set(F.values), set(sums))
        for e, total in sums.items():
            self.assertLess(abs(F[e] - total / z), 1e-12, e)



if __name__ == "__main__":
    unittest.main()
