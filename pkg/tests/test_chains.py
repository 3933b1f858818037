import unittest

from src.errors import InvalidParams, OutOfDomain
from src.lattice import special
from src.lattice.domain import Quad
from src.model.chains import chain_events, hamming_crossing, hamming_dijkstra
from src.model.measure import Configuration
from src.utils.rng import make_rng


class HammingTests(unittest.TestCase):
    def test_extremes(self):
        quad = special.rect(4, 2).quad()
        k, chain = hamming_crossing(Configuration.full(quad.domain), quad)
        self.assertEqual(k, 0)
        self.assertEqual(len(chain), 1)
        self.assertEqual(chain.min_diameter, 4)
        k, chain = hamming_crossing(Configuration.empty(quad.domain), quad)
        self.assertEqual(k, 4)
        self.assertEqual(len(chain), 5)
        self.assertEqual(chain.min_diameter, 0)

    def test_matches_dijkstra_and_chain_structure(self):
        quad = special.rect(5, 3).quad()
        dom = quad.domain
        rng = make_rng(8)
        for p in (0.2, 0.4, 0.5, 0.6):
            for _ in range(15):
                config = Configuration(dom, rng.random(dom.n_edges) < p)
                k, chain = hamming_crossing(config, quad)
                self.assertEqual(k, hamming_dijkstra(config, quad))
                self.assertEqual(len(chain), k + 1)
                self.assertEqual(len(chain.defects), k)
                self.assertEqual(len(set(chain.clusters)), len(chain))
                for e in chain.defects:
                    self.assertFalse(config.bits[e])

    def test_matches_dijkstra_on_box(self):
        dom = special.box(3).domain
        quad = Quad(dom, (-3, 3), (-3, -3), (3, -3), (3, 3))
        rng = make_rng(21)
        for i in range(1000):
            config = Configuration(dom, rng.random(dom.n_edges) < rng.uniform(0.2, 0.8))
            with self.subTest(config=i):
                self.assertEqual(hamming_crossing(config, quad)[0], hamming_dijkstra(config, quad))


class ChainEventTests(unittest.TestCase):
    def setUp(self):
        self.domain = special.rect(8, 4).domain

    def test_fully_open(self):
        ev = chain_events(Configuration.full(self.domain), N=4, ell=2.0, K=3, alpha=0.25, delta=0.25)
        self.assertTrue(ev.G)
        self.assertTrue(ev.H)
        self.assertFalse(ev.F)
        self.assertEqual(ev.k, 0)
        self.assertEqual(ev.chain_length, 1)

    def test_fully_closed(self):
        ev = chain_events(Configuration.empty(self.domain), N=4, ell=2.0, K=3, alpha=0.25, delta=0.25)
        self.assertFalse(ev.G)
        self.assertTrue(ev.H)
        self.assertFalse(ev.F)
        self.assertEqual(ev.k, 8)
        self.assertEqual(ev.chain_length, -1)
        self.assertEqual(ev.as_dict(), {"G": False, "H": True, "F": False})

    def test_two_parallel_crossings(self):
        rows = [((x, y), (x + 1, y)) for y in (0, 2) for x in range(8)]
        config = Configuration.from_edges(self.domain, rows)
        ev = chain_events(config, N=4, ell=2.0, K=3, alpha=0.5, delta=0.25)
        self.assertTrue(ev.G)
        self.assertFalse(ev.H)
        self.assertTrue(ev.F)
        self.assertEqual(ev.k, 0)

    def test_validation(self):
        full = Configuration.full(self.domain)
        with self.assertRaises(InvalidParams):
            chain_events(full, N=4, ell=2.0, K=0, alpha=0.25, delta=0.25)
        with self.assertRaises(OutOfDomain):
            chain_events(full, N=5, ell=2.0, K=3, alpha=0.25, delta=0.25)


if __name__ == "__main__":
    unittest.main()
