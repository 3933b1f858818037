import unittest

from src.errors import InvalidParams
from src.lattice.domain import Quad, is_r_centred
from src.lattice.medial import medial_graph
from src.lattice import special


class SpecialDomainTests(unittest.TestCase):
    def test_rect_quad(self):
        sd = special.rect(3, 2)
        quad = sd.quad()
        self.assertIsInstance(quad, Quad)
        self.assertEqual(quad.marks, ((0, 2), (0, 0), (3, 0), (3, 2)))
        self.assertEqual(len(sd.domain.faces), 6)

    def test_self_dual_rect_shape(self):
        sd = special.self_dual_rect(3)
        self.assertEqual(sd.marks["c"], (4, 0))
        self.assertEqual(sd.marks["a"], (0, 3))
        self.assertEqual(len(sd.domain.faces), 12)

    def test_l_shape(self):
        sd = special.l_shape(2)
        self.assertEqual(len(sd.domain.faces), 12)
        self.assertFalse(sd.domain.has_vertex((4, 4)))
        sd.quad()

    def test_staircase_quad_deterministic(self):
        one = special.staircase_quad(3, seed=7)
        two = special.staircase_quad(3, seed=7)
        self.assertEqual(one.domain.boundary, two.domain.boundary)
        one.quad()
        special.staircase_quad(3).quad()

    def test_planes(self):
        hp = special.half_plane(2)
        self.assertTrue(hp.domain.on_boundary((0, 0)))
        self.assertTrue(hp.domain.has_vertex((8, 8)))
        self.assertFalse(hp.domain.has_vertex((0, -1)))
        qp = special.quarter_plane(2, factor=2)
        self.assertTrue(qp.domain.on_boundary((0, 0)))
        self.assertTrue(qp.domain.has_vertex((4, 4)))

    def test_corner_domains_have_valid_marks(self):
        for closing in ("staircase", "box"):
            for m, ell in ((1, 1), (2, 1), (1, 2)):
                sd = special.corner(m, ell, closing)
                self.assertTrue(sd.domain.on_boundary(sd.a))
                self.assertTrue(sd.domain.on_boundary(sd.b))
                self.assertEqual(sd.domain.arc(sd.a, sd.b)[1], (ell - 1, 0))
                medial_graph(sd.domain, (sd.a, sd.b))
        with self.assertRaises(InvalidParams):
            special.corner(1, 1, "circle")

    def test_trapeze_and_notched_strip_marks(self):
        for sd in (special.trapeze(2, 1, 1), special.notched_strip(2, 1, 1)):
            self.assertTrue(sd.domain.on_boundary(sd.a), sd.kind)
            self.assertTrue(sd.domain.on_boundary(sd.b), sd.kind)
        with self.assertRaises(InvalidParams):
            special.notched_strip(2, 1, 1, half_width=3)

    def test_slit_box(self):
        sd = special.slit_box(1)
        self.assertEqual(sd.a, sd.b)
        self.assertTrue(sd.domain.on_boundary((0, 0)))
        self.assertFalse(sd.domain.has_vertex((1, 0)))

    def test_special_domain_dispatch(self):
        self.assertEqual(special.special_domain("box", n=2).domain.n_edges, 40)
        with self.assertRaises(InvalidParams):
            special.special_domain("moebius", n=2)
        with self.assertRaises(InvalidParams):
            special.special_domain("box", radius=2)
        with self.assertRaises(InvalidParams):
            special.box(0)

    def test_random_centred_domains(self):
        for family in special.CENTRED_FAMILIES:
            dom = special.random_centred_domain(2, family, seed=3)
            self.assertTrue(is_r_centred(dom, 2), family)
            again = special.random_centred_domain(2, family, seed=3)
            self.assertEqual(dom.boundary, again.boundary)
        with self.assertRaises(InvalidParams):
            special.random_centred_domain(2, "fractal", seed=1)


if __name__ == "__main__":
    unittest.main()
