import unittest

from src.actions import dobrushin_suite
from src.errors import InvalidMarks
from src.lattice.domain import Domain, rect_loop
from src.lattice.medial import (
    DIAGONALS,
    is_horizontal,
    medial_graph,
    midpoint,
    orient,
    primal_edge,
    primal_edge_index,
)
from src.lattice import special


class MedialGeometryTests(unittest.TestCase):
    def test_midpoint_round_trip(self):
        for e in (((0, 0), (1, 0)), ((2, 3), (2, 4)), ((-1, -1), (0, -1))):
            m = midpoint(*e)
            self.assertEqual(primal_edge(m), e)
            self.assertEqual(is_horizontal(m), e[0][1] == e[1][1])

    def test_orientation_is_consistent(self):
        h = (1, 0)
        self.assertEqual(orient(h, (2, 1)), ((2, 1), h))
        self.assertEqual(orient(h, (0, -1)), ((0, -1), h))
        self.assertEqual(orient(h, (2, -1)), (h, (2, -1)))
        self.assertEqual(orient(h, (0, 1)), (h, (0, 1)))
        # every medial vertex has two incoming and two outgoing edges
        for m in ((1, 0), (0, 1), (3, 4), (4, 3)):
            edges = [orient(m, (m[0] + dx, m[1] + dy)) for dx, dy in DIAGONALS]
            self.assertEqual(sum(1 for e in edges if e[1] == m), 2)
            self.assertEqual(sum(1 for e in edges if e[0] == m), 2)
            self.assertEqual(orient(*reversed(edges[0])), edges[0])


class MedialGraphTests(unittest.TestCase):
    def test_unit_square(self):
        dom = Domain(rect_loop(0, 0, 1, 1))
        g = medial_graph(dom)
        self.assertEqual(len(g.vertices), 4)
        self.assertEqual(len(g.edges), 4)
        for m in g.vertices:
            self.assertEqual(g.degree(m), 2)
        self.assertIs(medial_graph(dom), g)

    def test_primal_edge_index(self):
        dom = Domain(rect_loop(0, 0, 1, 1))
        self.assertEqual(dom.edges[primal_edge_index(dom, (1, 0))], ((0, 0), (1, 0)))
        self.assertEqual(primal_edge_index(dom, (3, 0)), -1)

    def test_dobrushin_graphs(self):
        for case in dobrushin_suite(18):
            g = medial_graph(case.domain, (case.a, case.b))
            with self.subTest(case=case.label):
                self.assertIn(g.e_a[1], g.interior)
                self.assertIn(g.e_b[0], g.interior)
                self.assertNotIn(g.e_a[0], g.interior)
                self.assertNotIn(g.e_b[1], g.interior)
                self.assertTrue(g.has_edge(g.e_a))
                self.assertTrue(g.has_edge(g.e_b))
                self.assertEqual(len(g.wired_edges), len(case.domain.arc_edges(case.b, case.a)))
                for m in g.interior:
                    self.assertEqual(g.degree(m), 4)
                contour = g.contour()
                self.assertIn(g.e_a, contour)
                self.assertIn(g.e_b, contour)

    def test_marks_off_boundary(self):
        dom = special.box(2).domain
        with self.assertRaises(InvalidMarks):
            medial_graph(dom, ((0, 0), (2, 2)))


if __name__ == "__main__":
    unittest.main()
