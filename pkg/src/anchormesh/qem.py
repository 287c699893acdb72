"""Quadric error metrics and fine anchor refinement.

A quadric is the symmetric 4x4 form P*P^T accumulated over a vertex's
incident face planes; evaluating it at a homogeneous point gives the sum of
squared plane residuals. The fine stage moves each coarse anchor vertex to
the optimal collapse point of its best incident edge on a mutable working
copy of the target mesh.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .coarse import OFF_VERTEX, AnchorMesh, traversal_order
from .mesh import (
    DEGENERATE_AREA,
    AdjacencyMap,
    DegenerateFaceError,
    Plane,
    TriangleMesh,
    build_adjacency,
    face_plane,
)

# Upper-triangle layout of the symmetric 4x4 matrix:
# indices 0..9 = xx, xy, xz, xw, yy, yz, yw, zz, zw, ww
_TRIU_ROWS, _TRIU_COLS = np.triu_indices(4)

# Condition-number ceiling for the 3x3 minimization block; beyond it the
# stationary point is numerically meaningless and we fall back to endpoints.
CONDITION_LIMIT = 1e12


@dataclass(frozen=True, eq=False)
class Quadric:
    """Symmetric 4x4 error form stored as its 10 unique coefficients."""

    coeffs: np.ndarray  # (10,) float64

    @staticmethod
    def zero() -> "Quadric":
        return Quadric(np.zeros(10))

    def __add__(self, other: "Quadric") -> "Quadric":
        return Quadric(self.coeffs + other.coeffs)

    def matrix(self) -> np.ndarray:
        m = np.zeros((4, 4))
        m[_TRIU_ROWS, _TRIU_COLS] = self.coeffs
        m[_TRIU_COLS, _TRIU_ROWS] = self.coeffs
        return m

    def evaluate(self, point) -> float:
        """Value of [x y z 1]^T Q [x y z 1] at a 3D point."""
        return float(_evaluate_raw(self.coeffs, np.asarray(point, dtype=np.float64)))


def _evaluate_raw(c, p):
    x, y, z = p[..., 0], p[..., 1], p[..., 2]
    return (
        c[..., 0] * x * x + c[..., 4] * y * y + c[..., 7] * z * z + c[..., 9]
        + 2.0 * (c[..., 1] * x * y + c[..., 2] * x * z + c[..., 5] * y * z
                 + c[..., 3] * x + c[..., 6] * y + c[..., 8] * z)
    )


def plane_quadric(plane: Plane) -> Quadric:
    """Quadric P*P^T of a normalized plane; evaluates to (P^T X)^2."""
    p = plane.vector()
    return Quadric(np.outer(p, p)[_TRIU_ROWS, _TRIU_COLS])


def vertex_quadric(mesh: TriangleMesh, adjacency: AdjacencyMap, v: int) -> Quadric:
    """Sum of plane quadrics over the non-degenerate faces incident to ``v``."""
    acc = np.zeros(10)
    for fi in sorted(adjacency.vertex_faces[v]):
        try:
            plane = face_plane(mesh, fi)
        except DegenerateFaceError:
            continue
        acc += plane_quadric(plane).coeffs
    return Quadric(acc)


def edge_quadric(qa: Quadric, qb: Quadric) -> Quadric:
    """Error form of an edge: entrywise sum of its endpoint quadrics."""
    return qa + qb


def all_vertex_quadrics(mesh: TriangleMesh) -> np.ndarray:
    """Per-vertex quadric coefficients, (n, 10), vectorized over faces.

    Matches accumulating :func:`vertex_quadric` per vertex; degenerate faces
    contribute nothing.
    """
    acc = np.zeros((mesh.n_vertices, 10))
    if mesh.n_faces == 0:
        return acc
    a = mesh.vertices[mesh.faces[:, 0]]
    b = mesh.vertices[mesh.faces[:, 1]]
    c = mesh.vertices[mesh.faces[:, 2]]
    n = np.cross(b - a, c - a)
    norms = np.linalg.norm(n, axis=1)
    keep = 0.5 * norms > DEGENERATE_AREA
    if not keep.any():
        return acc
    d = -(n * a).sum(axis=1)
    p4 = np.concatenate([n, d[:, None]], axis=1)
    p4 = p4 / np.linalg.norm(p4, axis=1, keepdims=True)
    q = p4[:, _TRIU_ROWS] * p4[:, _TRIU_COLS]  # (m, 10)
    q[~keep] = 0.0
    for corner in range(3):
        np.add.at(acc, mesh.faces[:, corner], q)
    return acc


def _optimal_point_raw(coeffs, fallback_a, fallback_b):
    """(position, error) minimizing the quadric, with endpoint/midpoint
    fallback when the 3x3 block is singular or ill-conditioned.

    The block is solved analytically via its adjugate; the condition estimate
    is the 1-norm condition number.
    """
    c = coeffs
    a11, a12, a13, a22, a23, a33 = c[0], c[1], c[2], c[4], c[5], c[7]
    m11 = a22 * a33 - a23 * a23
    m12 = a13 * a23 - a12 * a33
    m13 = a12 * a23 - a13 * a22
    m22 = a11 * a33 - a13 * a13
    m23 = a12 * a13 - a11 * a23
    m33 = a11 * a22 - a12 * a12
    det = a11 * m11 + a12 * m12 + a13 * m13
    if det != 0.0:
        inv_det = 1.0 / det
        norm_a = max(abs(a11) + abs(a12) + abs(a13),
                     abs(a12) + abs(a22) + abs(a23),
                     abs(a13) + abs(a23) + abs(a33))
        norm_inv = abs(inv_det) * max(abs(m11) + abs(m12) + abs(m13),
                                      abs(m12) + abs(m22) + abs(m23),
                                      abs(m13) + abs(m23) + abs(m33))
        cond = norm_a * norm_inv
        if np.isfinite(cond) and cond < CONDITION_LIMIT:
            bx, by, bz = -c[3], -c[6], -c[8]
            point = np.array([
                (m11 * bx + m12 * by + m13 * bz) * inv_det,
                (m12 * bx + m22 * by + m23 * bz) * inv_det,
                (m13 * bx + m23 * by + m33 * bz) * inv_det,
            ])
            if np.all(np.isfinite(point)):
                return point, max(float(_evaluate_raw(c, point)), 0.0)
    fa = np.asarray(fallback_a, dtype=np.float64)
    fb = np.asarray(fallback_b, dtype=np.float64)
    mid = 0.5 * (fa + fb)
    candidates = (fa, mid, fb)  # tie order: a, then midpoint, then b
    errors = [max(float(_evaluate_raw(c, cand)), 0.0) for cand in candidates]
    best = min(range(3), key=lambda i: (errors[i], i))
    return candidates[best].copy(), errors[best]


def optimal_point(q: Quadric, fallback_a, fallback_b):
    """Minimizer of the quadric as ``(position, error)``.

    Solves the stationarity system of the affine form when the 3x3 block has
    condition below ``CONDITION_LIMIT``; otherwise returns the best of
    (fallback_a, midpoint, fallback_b), ties resolved in that order.
    """
    return _optimal_point_raw(q.coeffs, fallback_a, fallback_b)


class _WorkingCopy:
    """Mutable edge-collapse view of the target mesh.

    Face membership (``vfaces``) only ever contains live faces, so incident
    edges derived from it are always current.
    """

    def __init__(self, mesh: TriangleMesh):
        self.positions = mesh.vertices.copy()
        self.faces = [list(f) for f in mesh.faces.tolist()]
        self.vfaces = [set() for _ in range(mesh.n_vertices)]
        for fi, (a, b, c) in enumerate(self.faces):
            self.vfaces[a].add(fi)
            self.vfaces[b].add(fi)
            self.vfaces[c].add(fi)

    def neighbors_of(self, v: int) -> set:
        out = set()
        for fi in self.vfaces[v]:
            out.update(self.faces[fi])
        out.discard(v)
        return out

    def collapse(self, keep: int, drop: int, position) -> None:
        """Merge ``drop`` into ``keep`` and move ``keep`` to ``position``;
        faces containing both endpoints are deleted."""
        self.positions[keep] = position
        for fi in list(self.vfaces[drop]):
            f = self.faces[fi]
            if keep in f:
                for v in f:
                    self.vfaces[v].discard(fi)
            else:
                f[f.index(drop)] = keep
                self.vfaces[keep].add(fi)
                self.vfaces[drop].discard(fi)
        self.vfaces[drop].clear()


def _refine_with_diagnostics(coarse: AnchorMesh, target: TriangleMesh,
                             collapses_per_anchor: int = 1):
    if coarse.stage != "coarse":
        raise ValueError(f"expected a coarse anchor, got stage {coarse.stage!r}")
    corr = coarse.correspondence
    if np.any(corr < 0) or np.any(corr >= target.n_vertices):
        raise ValueError("coarse anchor has invalid target correspondences")
    work = _WorkingCopy(target)
    quadrics = all_vertex_quadrics(target)
    anchor_targets = set(corr.tolist())
    base_adjacency = build_adjacency(coarse.mesh)
    fine_positions = coarse.mesh.vertices.copy()
    out_corr = corr.copy()
    diagnostics = []  # (anchor index, selected error, edge error at pre-collapse position)
    for ai in traversal_order(coarse.mesh, base_adjacency):
        c = int(corr[ai])
        refined = False
        for _ in range(collapses_per_anchor):
            candidates = work.neighbors_of(c) - anchor_targets
            if not candidates:
                break
            best_key = None
            best = None  # (neighbor, point, edge coeffs)
            for nb in sorted(candidates):
                qe = quadrics[c] + quadrics[nb]
                point, err = _optimal_point_raw(qe, work.positions[c], work.positions[nb])
                key = (err, (c, nb) if c < nb else (nb, c))
                if best_key is None or key < best_key:
                    best_key = key
                    best = (nb, point, qe)
            nb, point, qe = best
            at_coarse = max(float(_evaluate_raw(qe, work.positions[c])), 0.0)
            diagnostics.append((ai, best_key[0], at_coarse))
            work.collapse(c, nb, point)
            quadrics[c] = qe
            fine_positions[ai] = point
            refined = True
        if refined:
            out_corr[ai] = OFF_VERTEX
    anchor = AnchorMesh(TriangleMesh(fine_positions, coarse.mesh.faces), out_corr, "fine")
    return anchor, diagnostics


def refine_anchor(coarse: AnchorMesh, target: TriangleMesh,
                  collapses_per_anchor: int = 1) -> AnchorMesh:
    """Refine a coarse anchor by one QEM edge collapse per anchor vertex.

    Runs over a shared working copy of the target. For each anchor vertex in
    traversal order, candidate edges are the working-copy edges incident to
    its corresponding target vertex whose opposite endpoint is not another
    anchor's correspondent; the candidate with minimal quadric error wins
    (ties to the lexicographically smallest edge) and its collapse is applied
    (merged vertex inherits the edge quadric). Anchors with no candidate edge
    keep their coarse position. Connectivity of the anchor mesh is untouched.
    """
    anchor, _ = _refine_with_diagnostics(coarse, target, collapses_per_anchor)
    return anchor
