"""Exact nearest-neighbor search over a 3D point set via an octree.

Queries return the true argmin of Euclidean distance with ties broken by
lowest point index, so results are interchangeable with a linear scan.
"""

from __future__ import annotations

import heapq
import math
from dataclasses import dataclass

import numpy as np

DEFAULT_LEAF_CAPACITY = 16
DEFAULT_MAX_DEPTH = 21
_PAD = 1e-9  # inflation of the tight bounding cube


class _Node:
    __slots__ = ("center", "half", "depth", "children", "indices")

    def __init__(self, center, half, depth):
        self.center = center
        self.half = half
        self.depth = depth
        self.children = None  # list of 8 (or None) when internal
        self.indices = None  # ascending point indices when leaf


@dataclass
class Octree:
    """Immutable octree over ``points`` with cubic node bounds.

    Child assignment is half-open per axis (coordinates equal to the center
    go to the upper child), so every point lands in exactly one leaf. Leaves
    exceeding ``leaf_capacity`` are only allowed at ``max_depth`` (duplicate
    points cannot be separated).
    """

    points: np.ndarray
    root: _Node
    leaf_capacity: int
    max_depth: int

    @property
    def center(self) -> np.ndarray:
        return self.root.center

    @property
    def half_width(self) -> float:
        return self.root.half


def build_octree(points, leaf_capacity: int = DEFAULT_LEAF_CAPACITY,
                 max_depth: int = DEFAULT_MAX_DEPTH) -> Octree:
    """Build an octree over a non-empty point set (duplicates allowed)."""
    pts = np.array(points, dtype=np.float64, copy=True).reshape(-1, 3)
    if len(pts) == 0:
        raise ValueError("cannot build an octree over an empty point set")
    if leaf_capacity < 1:
        raise ValueError("leaf_capacity must be >= 1")
    pts.setflags(write=False)
    lo = pts.min(axis=0)
    hi = pts.max(axis=0)
    center = 0.5 * (lo + hi)
    half = float((hi - lo).max()) * 0.5 + _PAD
    root = _build_node(pts, np.arange(len(pts)), center, half, 0,
                       leaf_capacity, max_depth)
    return Octree(pts, root, leaf_capacity, max_depth)


def _build_node(pts, indices, center, half, depth, leaf_capacity, max_depth):
    node = _Node(center, half, depth)
    if len(indices) <= leaf_capacity or depth >= max_depth:
        node.indices = indices
        return node
    sub = pts[indices]
    hx = (sub[:, 0] >= center[0]).astype(np.int8)
    hy = (sub[:, 1] >= center[1]).astype(np.int8)
    hz = (sub[:, 2] >= center[2]).astype(np.int8)
    cell = hx * 4 + hy * 2 + hz
    quarter = half * 0.5
    children = [None] * 8
    for cid in range(8):
        mask = cell == cid
        if not mask.any():
            continue
        offset = np.array(
            [quarter if cid & 4 else -quarter,
             quarter if cid & 2 else -quarter,
             quarter if cid & 1 else -quarter]
        )
        children[cid] = _build_node(pts, indices[mask], center + offset, quarter,
                                    depth + 1, leaf_capacity, max_depth)
    node.children = children
    return node


def _box_sq_distance(q, center, half):
    dx = max(0.0, abs(q[0] - center[0]) - half)
    dy = max(0.0, abs(q[1] - center[1]) - half)
    dz = max(0.0, abs(q[2] - center[2]) - half)
    return dx * dx + dy * dy + dz * dz


def nearest(octree: Octree, query):
    """Exact nearest neighbor: returns ``(index, distance)``.

    Best-first traversal ordered by squared cube distance; nodes are pruned
    only when strictly farther than the current best, which preserves the
    lowest-index tie rule even across leaf boundaries.
    """
    q = np.asarray(query, dtype=np.float64).reshape(3)
    best_d2 = math.inf
    best_i = -1
    seq = 0
    heap = [(0.0, seq, octree.root)]
    while heap:
        box_d2, _, node = heapq.heappop(heap)
        if box_d2 > best_d2:
            break
        if node.indices is not None:
            diff = octree.points[node.indices] - q
            d2 = (diff * diff).sum(axis=1)
            j = int(np.argmin(d2))  # first minimum: lowest index in the leaf
            dj = float(d2[j])
            ij = int(node.indices[j])
            if dj < best_d2 or (dj == best_d2 and ij < best_i):
                best_d2 = dj
                best_i = ij
        else:
            for child in node.children:
                if child is None:
                    continue
                bd2 = _box_sq_distance(q, child.center, child.half)
                if bd2 <= best_d2:
                    seq += 1
                    heapq.heappush(heap, (bd2, seq, child))
    return best_i, math.sqrt(best_d2)
