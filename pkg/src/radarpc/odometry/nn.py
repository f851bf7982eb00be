"""Grid-bucketed nearest-neighbour search for 2D points.

Points are sorted by bucket key; a query scans the 3x3 block of buckets around
its own, so any neighbour within one bucket side is guaranteed to be seen.
"""

from __future__ import annotations

import numpy as np
from numba import njit


@njit(cache=True)
def _lookup(keys, key):
    lo, hi = 0, len(keys)
    while lo < hi:
        mid = (lo + hi) // 2
        if keys[mid] < key:
            lo = mid + 1
        else:
            hi = mid
    if lo < len(keys) and keys[lo] == key:
        return lo
    return -1


@njit(cache=True)
def _nearest(pts, orig, cell_keys, starts, queries, cell, ox, oy, ny, max_dist):
    n = len(queries)
    idx = np.full(n, -1, dtype=np.int64)
    dist = np.full(n, np.inf)
    r2max = max_dist * max_dist
    for q in range(n):
        qx = queries[q, 0]
        qy = queries[q, 1]
        cx = int(np.floor((qx - ox) / cell))
        cy = int(np.floor((qy - oy) / cell))
        best = r2max
        best_i = -1
        for dx in range(-1, 2):
            gx = cx + dx
            for dy in range(-1, 2):
                gy = cy + dy
                if gy < 0 or gy >= ny or gx < 0:
                    continue
                k = _lookup(cell_keys, gx * ny + gy)
                if k < 0:
                    continue
                for j in range(starts[k], starts[k + 1]):
                    ddx = pts[j, 0] - qx
                    ddy = pts[j, 1] - qy
                    d2 = ddx * ddx + ddy * ddy
                    # ties go to the lowest original index, as a linear scan would
                    if d2 < best or (d2 == best and (best_i < 0 or orig[j] < orig[best_i])):
                        best = d2
                        best_i = j
        if best_i >= 0:
            idx[q] = best_i
            dist[q] = np.sqrt(best)
    return idx, dist


class GridIndex:
    """Nearest neighbour within ``cell`` metres of each query (bucket side = ``cell``)."""

    def __init__(self, points: np.ndarray, cell: float):
        if not cell > 0:
            raise ValueError("cell size must be > 0")
        pts = np.asarray(points, dtype=np.float64).reshape(-1, 2)
        if len(pts) == 0:
            raise ValueError("cannot index an empty point set")
        self.cell = float(cell)
        self.origin = pts.min(axis=0)
        gxy = np.floor((pts - self.origin) / self.cell).astype(np.int64)
        self.ny = int(gxy[:, 1].max()) + 1
        keys = gxy[:, 0] * self.ny + gxy[:, 1]
        order = np.argsort(keys, kind="stable")
        self._order = order
        self._pts = np.ascontiguousarray(pts[order])
        sorted_keys = keys[order]
        self._cell_keys, first = np.unique(sorted_keys, return_index=True)
        self._starts = np.append(first, len(sorted_keys)).astype(np.int64)

    def __len__(self) -> int:
        return len(self._pts)

    def nearest(self, queries: np.ndarray, max_dist: float | None = None) -> tuple[np.ndarray, np.ndarray]:
        """Index into the original point array and distance; ``-1``/``inf`` when nothing is in range."""
        max_dist = self.cell if max_dist is None else float(max_dist)
        if max_dist > self.cell:
            raise ValueError(f"max_dist {max_dist} exceeds the bucket side {self.cell}")
        q = np.ascontiguousarray(np.asarray(queries, dtype=np.float64).reshape(-1, 2))
        j, d = _nearest(self._pts, self._order, self._cell_keys, self._starts, q, self.cell,
                        self.origin[0], self.origin[1], self.ny, max_dist)
        found = j >= 0
        out = np.full(len(q), -1, dtype=np.int64)
        out[found] = self._order[j[found]]
        return out, d


def brute_force_nearest(points: np.ndarray, queries: np.ndarray, max_dist: float) -> tuple[np.ndarray, np.ndarray]:
    pts = np.asarray(points, dtype=np.float64).reshape(-1, 2)
    q = np.asarray(queries, dtype=np.float64).reshape(-1, 2)
    d = np.hypot(q[:, None, 0] - pts[None, :, 0], q[:, None, 1] - pts[None, :, 1])
    j = np.argmin(d, axis=1)
    best = d[np.arange(len(q)), j]
    ok = best <= max_dist
    return np.where(ok, j, -1), np.where(ok, best, np.inf)
