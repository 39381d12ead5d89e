"""Exact k-nearest-neighbour search with a ball tree (Euclidean metric).

Nodes are split on the dimension of largest spread at the median; a node
with at most ``leaf_size`` points is a leaf. Subtrees are pruned with the
bound ``max(0, |q - center| - radius)``. Results equal a brute-force scan,
ties in distance going to the lower training index.
"""

from __future__ import annotations

import heapq

import numpy as np

from ..errors import ClassifierError


def distances(points: np.ndarray, q: np.ndarray) -> np.ndarray:
    diff = points - q
    return np.sqrt(np.einsum("ij,ij->i", diff, diff))


class BallTree:
    def __init__(self, X, leaf_size: int = 10):
        X = np.asarray(X, dtype=np.float64)
        if X.ndim != 2 or X.shape[0] == 0:
            raise ClassifierError("ball tree needs a non-empty 2-D point set")
        if leaf_size < 1:
            raise ClassifierError("leaf_size must be >= 1")
        self.X = X
        self.leaf_size = int(leaf_size)
        self.index = np.arange(X.shape[0])
        # per node: start, end into self.index, children (-1 at leaves)
        self._start, self._end, self._left, self._right = [], [], [], []
        self._center, self._radius = [], []
        self._build(0, X.shape[0])

    @property
    def n_nodes(self) -> int:
        return len(self._start)

    def _build(self, start: int, end: int) -> int:
        node = len(self._start)
        idx = self.index[start:end]
        pts = self.X[idx]
        center = pts.mean(axis=0)
        self._start.append(start)
        self._end.append(end)
        self._left.append(-1)
        self._right.append(-1)
        self._center.append(center)
        self._radius.append(float(distances(pts, center).max()))
        if end - start > self.leaf_size:
            spread = pts.max(axis=0) - pts.min(axis=0)
            dim = int(np.argmax(spread))
            order = np.lexsort((idx, pts[:, dim]))
            self.index[start:end] = idx[order]
            mid = start + (end - start) // 2
            self._left[node] = self._build(start, mid)
            self._right[node] = self._build(mid, end)
        return node

    def query(self, q, k: int) -> tuple[np.ndarray, np.ndarray]:
        """Return ``(dist, index)`` of the ``k`` nearest points, nearest first."""
        q = np.asarray(q, dtype=np.float64).reshape(-1)
        if q.shape[0] != self.X.shape[1]:
            raise ClassifierError(f"query has {q.shape[0]} dims, tree has {self.X.shape[1]}")
        k = min(int(k), self.X.shape[0])
        if k < 1:
            raise ClassifierError("k must be >= 1")
        heap: list[tuple[float, int]] = []  # max-heap on (dist, index) via negation

        def bound(node):
            dc = float(np.sqrt(np.sum((q - self._center[node]) ** 2)))
            r = self._radius[node]
            # slack absorbs rounding so equal-distance ties are never pruned
            return max(0.0, dc - r - 1e-10 * (dc + r))

        def visit(node, lb):
            if len(heap) == k and lb > -heap[0][0]:
                return
            left = self._left[node]
            if left < 0:
                idx = self.index[self._start[node] : self._end[node]]
                for d, i in zip(distances(self.X[idx], q).tolist(), idx.tolist()):
                    if len(heap) < k:
                        heapq.heappush(heap, (-d, -i))
                    elif (d, i) < (-heap[0][0], -heap[0][1]):
                        heapq.heapreplace(heap, (-d, -i))
                return
            right = self._right[node]
            bl, br = bound(left), bound(right)
            if bl <= br:
                visit(left, bl)
                visit(right, br)
            else:
                visit(right, br)
                visit(left, bl)

        visit(0, bound(0))
        found = sorted((-nd, -ni) for nd, ni in heap)
        return (
            np.array([d for d, _ in found], dtype=np.float64),
            np.array([i for _, i in found], dtype=np.int64),
        )
