import unittest

import networkx as nx
from hypothesis import given, settings
from hypothesis import strategies as st

from src.utils.unionfind import UnionFind


class UnionFindTests(unittest.TestCase):
    def test_union_reports_merge(self):
        uf = UnionFind(4)
        self.assertTrue(uf.union(0, 1))
        self.assertFalse(uf.union(1, 0))
        self.assertTrue(uf.is_same(0, 1))
        self.assertFalse(uf.is_same(0, 2))
        self.assertEqual(uf.count_roots(), 3)

    def test_labels_are_smallest_member(self):
        uf = UnionFind(5)
        uf.union(4, 2)
        uf.union_all([3, 1])
        self.assertEqual(uf.labels(), [0, 1, 2, 1, 2])

    def test_long_chain_compresses(self):
        n = 10_000
        uf = UnionFind(n)
        for i in range(n - 1):
            uf.union(i, i + 1)
        self.assertEqual(uf.count_roots(), 1)
        self.assertTrue(uf.is_same(0, n - 1))

    @settings(max_examples=60, deadline=None)
    @given(st.integers(min_value=1, max_value=30).flatmap(
        lambda n: st.tuples(st.just(n), st.lists(st.tuples(st.integers(0, n - 1), st.integers(0, n - 1)),
                                                 max_size=40))))
    def test_matches_networkx_components(self, case):
        n, pairs = case
        uf = UnionFind(n)
        g = nx.Graph()
        g.add_nodes_from(range(n))
        for a, b in pairs:
            uf.union(a, b)
            g.add_edge(a, b)
        self.assertEqual(uf.count_roots(), nx.number_connected_components(g))
        for comp in nx.connected_components(g):
            labels = {uf.labels()[v] for v in comp}
            self.assertEqual(labels, {min(comp)})


if __name__ == "__main__":
    unittest.main()
