"""Coarse anchor mesh generation: motion-compensated nearest-vertex matching.

Each reference-base vertex is matched to a target vertex: an estimated motion
(mean of already-processed neighbor motions) offsets the query point before
the nearest-neighbor lookup, and the realized motion is recorded as the
difference between the matched position and the reference position.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass

import numpy as np

from .mesh import AdjacencyMap, TriangleMesh, build_adjacency
from .octree import Octree, build_octree, nearest

# Correspondence marker for anchor vertices that no longer coincide with a
# target vertex (set by the fine refinement stage).
OFF_VERTEX = -1


@dataclass
class MotionField:
    """Per-reference-vertex motion vectors plus processed flags."""

    vectors: np.ndarray  # (n, 3) float64
    processed: np.ndarray  # (n,) bool


@dataclass
class AnchorMesh:
    """Mesh sharing the reference base connectivity, fitted to a target frame.

    ``correspondence[i]`` is the target vertex index vertex ``i`` coincides
    with, or ``OFF_VERTEX`` once refinement moved it off the vertex set.
    ``stage`` is ``"coarse"`` or ``"fine"``.
    """

    mesh: TriangleMesh
    correspondence: np.ndarray  # (n,) int64
    stage: str


def traversal_order(base: TriangleMesh, adjacency: AdjacencyMap = None) -> list:
    """Deterministic vertex processing order.

    Breadth-first from vertex 0; each connected component is seeded at its
    lowest unvisited index and neighbors expand in ascending index order.
    """
    if adjacency is None:
        adjacency = build_adjacency(base)
    n = base.n_vertices
    visited = [False] * n
    order = []
    for seed in range(n):
        if visited[seed]:
            continue
        visited[seed] = True
        queue = deque([seed])
        while queue:
            v = queue.popleft()
            order.append(v)
            for u in sorted(adjacency.neighbors[v]):
                if not visited[u]:
                    visited[u] = True
                    queue.append(u)
    return order


def estimate_motion(vertex: int, adjacency: AdjacencyMap, motion: MotionField) -> np.ndarray:
    """Arithmetic mean of the motions of already-processed neighbors.

    Returns the zero vector when no neighbor has been processed yet (seed
    vertices fall back to plain nearest-neighbor matching).
    """
    rows = [u for u in sorted(adjacency.neighbors[vertex]) if motion.processed[u]]
    if not rows:
        return np.zeros(3)
    return motion.vectors[rows].mean(axis=0)


def generate_coarse_anchor(base: TriangleMesh, target: TriangleMesh,
                           index: Octree = None,
                           motion_estimation: bool = True):
    """Match every base vertex to a target vertex, producing the coarse anchor.

    For each vertex in traversal order: estimate its motion from processed
    neighbors, query the octree at the offset position, snap the anchor
    vertex to the returned target vertex (exact copy), and record the motion
    as matched position minus reference position. The face list is copied
    verbatim from ``base``. With ``motion_estimation=False`` every query uses
    a zero offset (plain nearest-neighbor matching, the ablation baseline).

    Returns ``(AnchorMesh, MotionField)``.
    """
    if index is None:
        index = build_octree(target.vertices)
    adjacency = build_adjacency(base)
    n = base.n_vertices
    vectors = np.zeros((n, 3))
    processed = np.zeros(n, dtype=bool)
    motion = MotionField(vectors, processed)
    correspondence = np.full(n, OFF_VERTEX, dtype=np.int64)
    anchor_positions = np.empty((n, 3))
    zero = np.zeros(3)
    for v in traversal_order(base, adjacency):
        est = estimate_motion(v, adjacency, motion) if motion_estimation else zero
        j, _ = nearest(index, base.vertices[v] + est)
        anchor_positions[v] = target.vertices[j]
        correspondence[v] = j
        vectors[v] = anchor_positions[v] - base.vertices[v]
        processed[v] = True
    anchor = AnchorMesh(TriangleMesh(anchor_positions, base.faces), correspondence, "coarse")
    return anchor, motion
