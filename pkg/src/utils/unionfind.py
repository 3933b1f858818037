"""
Union-find over integer vertex indices.

Path compression plus union by rank. Used for cluster labelling with wired
boundary blocks contracted.
"""
from __future__ import annotations

from typing import Iterable, List


class UnionFind:
    def __init__(self, n: int):
        self.parent = list(range(n))
        self.rank = [0] * n

    def _find(self, x: int) -> int:
        root = x
        while self.parent[root] != root:
            root = self.parent[root]
        # compress iteratively; clusters can be long at criticality
        while self.parent[x] != root:
            self.parent[x], x = root, self.parent[x]
        return root

    def find(self, x: int) -> int:
        return self._find(x)

    def union(self, x: int, y: int) -> bool:
        """Merge the sets of x and y. Returns True if they were distinct."""
        x_root = self._find(x)
        y_root = self._find(y)
        if x_root == y_root:
            return False
        if self.rank[x_root] < self.rank[y_root]:
            self.parent[x_root] = y_root
        elif self.rank[x_root] > self.rank[y_root]:
            self.parent[y_root] = x_root
        else:
            self.parent[y_root] = x_root
            self.rank[x_root] += 1
        return True

    def union_all(self, items: Iterable[int]) -> None:
        it = iter(items)
        try:
            first = next(it)
        except StopIteration:
            return
        for other in it:
            self.union(first, other)

    def is_same(self, x: int, y: int) -> bool:
        return self._find(x) == self._find(y)

    def count_roots(self) -> int:
        return sum(1 for i in range(len(self.parent)) if self._find(i) == i)

    def labels(self) -> List[int]:
        """Component label per element: the smallest index in its component."""
        smallest: dict[int, int] = {}
        out = []
        for i in range(len(self.parent)):
            root = self._find(i)
            if root not in smallest:
                smallest[root] = i
            out.append(smallest[root])
        return out

    def __repr__(self) -> str:
        return f"UnionFind({self.parent})"
