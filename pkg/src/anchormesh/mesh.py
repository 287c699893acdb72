"""Indexed triangle meshes: OBJ I/O, adjacency, face planes, closest-point queries.

Positions are kept in double precision throughout; integer quantization only
ever happens in :mod:`anchormesh.quantize`. Non-manifold connectivity is
accepted everywhere -- adjacency is purely combinatorial.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

# Faces with area at or below this are treated as slivers: they have no
# usable plane and are skipped when accumulating quadrics.
DEGENERATE_AREA = 1e-12


class MeshError(Exception):
    """Base class for mesh construction and query failures."""


class ObjParseError(MeshError):
    """Malformed OBJ record. ``line`` is the 1-based line number."""

    def __init__(self, line: int, message: str):
        super().__init__(f"line {line}: {message}")
        self.line = line


class MeshValidationError(MeshError):
    """Mesh violates a structural invariant (index out of range, repeated index)."""


class DegenerateFaceError(MeshError):
    """Face has (near) zero area, so it defines no plane."""


@dataclass(frozen=True, eq=False)
class TriangleMesh:
    """Indexed triangle soup: ``vertices`` (n, 3) float64, ``faces`` (m, 3) int64.

    Arrays are copied and frozen on construction, so instances are safe to
    share across threads. Face and vertex order is significant and preserved
    by OBJ round trips.
    """

    vertices: np.ndarray
    faces: np.ndarray

    def __post_init__(self):
        verts = np.array(self.vertices, dtype=np.float64, copy=True).reshape(-1, 3)
        faces = np.array(self.faces, dtype=np.int64, copy=True).reshape(-1, 3)
        if faces.size:
            if faces.min() < 0 or faces.max() >= len(verts):
                raise MeshValidationError(
                    f"face index out of range for {len(verts)} vertices"
                )
            repeated = (
                (faces[:, 0] == faces[:, 1])
                | (faces[:, 1] == faces[:, 2])
                | (faces[:, 0] == faces[:, 2])
            )
            if repeated.any():
                raise MeshValidationError(
                    f"face {int(np.flatnonzero(repeated)[0])} repeats a vertex index"
                )
        verts.setflags(write=False)
        faces.setflags(write=False)
        object.__setattr__(self, "vertices", verts)
        object.__setattr__(self, "faces", faces)

    @property
    def n_vertices(self) -> int:
        return len(self.vertices)

    @property
    def n_faces(self) -> int:
        return len(self.faces)


@dataclass
class AdjacencyMap:
    """Combinatorial adjacency of a mesh.

    ``neighbors[v]`` is the set of vertices sharing an edge with ``v``,
    ``vertex_faces[v]`` the set of incident face indices, and ``edges`` the
    unique undirected edges as (lo, hi) pairs in lexicographic order.
    Treat instances as read-only once built.
    """

    neighbors: list
    vertex_faces: list
    edges: list


@dataclass(frozen=True)
class Plane:
    """Plane a*x + b*y + c*z + d = 0 with the full coefficient 4-vector
    normalized to unit Euclidean norm."""

    a: float
    b: float
    c: float
    d: float

    def vector(self) -> np.ndarray:
        return np.array([self.a, self.b, self.c, self.d])

    @property
    def normal(self) -> np.ndarray:
        return np.array([self.a, self.b, self.c])

    def signed_residual(self, point) -> float:
        x, y, z = np.asarray(point, dtype=np.float64)
        return self.a * x + self.b * y + self.c * z + self.d


@dataclass(frozen=True)
class SurfacePoint:
    """A point on a mesh surface: position, owning face, barycentric weights."""

    position: np.ndarray
    face: int
    bary: np.ndarray


def load_mesh(data) -> TriangleMesh:
    """Parse an ASCII OBJ (``v``/``f`` records only) into a TriangleMesh.

    Texture/normal references on face records (``f 2/1/1 ...``) are stripped;
    ``vt``, ``vn`` and every other record type are ignored. OBJ indices are
    1-based and converted to 0-based. Raises :class:`ObjParseError` for
    malformed records and :class:`MeshValidationError` for out-of-range or
    repeated indices, both carrying the offending line number.
    """
    if isinstance(data, bytes):
        data = data.decode("utf-8")
    verts = []
    face_specs = []  # (line number, [i, j, k]) with 1-based indices
    for line_no, raw in enumerate(data.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.split()
        if parts[0] == "v":
            if len(parts) != 4:
                raise ObjParseError(line_no, f"expected 'v x y z', got {raw.strip()!r}")
            try:
                verts.append([float(p) for p in parts[1:]])
            except ValueError:
                raise ObjParseError(line_no, f"bad vertex coordinate in {raw.strip()!r}")
        elif parts[0] == "f":
            if len(parts) != 4:
                raise ObjParseError(
                    line_no, f"only triangular faces are supported, got {raw.strip()!r}"
                )
            idx = []
            for token in parts[1:]:
                head = token.split("/", 1)[0]
                try:
                    idx.append(int(head))
                except ValueError:
                    raise ObjParseError(line_no, f"bad face index {token!r}")
            if len(set(idx)) != 3:
                raise MeshValidationError(
                    f"line {line_no}: face repeats a vertex index"
                )
            face_specs.append((line_no, idx))
        # anything else (vt, vn, o, g, s, usemtl, mtllib, ...) is discarded
    n = len(verts)
    faces = np.empty((len(face_specs), 3), dtype=np.int64)
    for row, (line_no, idx) in enumerate(face_specs):
        for i in idx:
            if i < 1 or i > n:
                raise MeshValidationError(
                    f"line {line_no}: face index {i} out of range for {n} vertices"
                )
        faces[row] = [i - 1 for i in idx]
    return TriangleMesh(np.asarray(verts, dtype=np.float64).reshape(-1, 3), faces)


def save_mesh(mesh: TriangleMesh) -> bytes:
    """Serialize to ASCII OBJ such that ``load_mesh(save_mesh(m))`` reproduces
    ``m`` exactly.

    Coordinates are printed with Python's shortest round-trip repr, which
    never loses double precision; vertex and face order are preserved.
    """
    lines = ["# OBJ written by anchormesh"]
    for x, y, z in mesh.vertices.tolist():
        lines.append(f"v {x!r} {y!r} {z!r}")
    for a, b, c in mesh.faces.tolist():
        lines.append(f"f {a + 1} {b + 1} {c + 1}")
    return ("\n".join(lines) + "\n").encode("utf-8")


def build_adjacency(mesh: TriangleMesh) -> AdjacencyMap:
    """Vertex neighbors, incident faces and the unique undirected edge list."""
    n = mesh.n_vertices
    neighbors = [set() for _ in range(n)]
    vertex_faces = [set() for _ in range(n)]
    for fi, (a, b, c) in enumerate(mesh.faces.tolist()):
        neighbors[a].update((b, c))
        neighbors[b].update((a, c))
        neighbors[c].update((a, b))
        vertex_faces[a].add(fi)
        vertex_faces[b].add(fi)
        vertex_faces[c].add(fi)
    if mesh.n_faces:
        pairs = np.vstack(
            [mesh.faces[:, [0, 1]], mesh.faces[:, [1, 2]], mesh.faces[:, [2, 0]]]
        )
        pairs = np.sort(pairs, axis=1)
        edges = [tuple(e) for e in np.unique(pairs, axis=0).tolist()]
    else:
        edges = []
    return AdjacencyMap(neighbors, vertex_faces, edges)


def face_plane(mesh: TriangleMesh, face: int) -> Plane:
    """Supporting plane of a face, oriented by the right-hand winding rule.

    The coefficient 4-vector (a, b, c, d) is normalized to unit Euclidean
    norm. Raises :class:`DegenerateFaceError` when the face area is at or
    below ``DEGENERATE_AREA``.
    """
    a, b, c = mesh.vertices[mesh.faces[face]]
    n = np.cross(b - a, c - a)
    if 0.5 * float(np.linalg.norm(n)) <= DEGENERATE_AREA:
        raise DegenerateFaceError(f"face {face} has (near) zero area")
    v = np.array([n[0], n[1], n[2], -float(n @ a)])
    v /= np.linalg.norm(v)
    return Plane(float(v[0]), float(v[1]), float(v[2]), float(v[3]))


def _row_dot(u, v):
    return (u * v).sum(axis=-1)


def _closest_on_segment(p, s0, s1):
    """Closest point on segment [s0, s1] for each broadcast row. Returns
    (position, t) with t clipped to [0, 1]."""
    d = s1 - s0
    denom = _row_dot(d, d)
    with np.errstate(divide="ignore", invalid="ignore"):
        t = _row_dot(p - s0, d) / denom
    t = np.where(denom > 0.0, t, 0.0)
    t = np.clip(t, 0.0, 1.0)
    return s0 + t[..., None] * d, t


def _closest_point_kernel(p, a, b, c):
    """Closest point on triangle (a, b, c) for query p, elementwise over any
    broadcast shape (..., 3). Returns (position, bary).

    Standard closest-point region classification; positions are reconstituted
    from the barycentric weights so the SurfacePoint invariant holds to
    rounding. Degenerate triangles fall back to the longest edge segment.
    """
    ab = b - a
    ac = c - a
    ap = p - a
    d1 = _row_dot(ab, ap)
    d2 = _row_dot(ac, ap)
    bp = p - b
    d3 = _row_dot(ab, bp)
    d4 = _row_dot(ac, bp)
    cp = p - c
    d5 = _row_dot(ab, cp)
    d6 = _row_dot(ac, cp)

    vc = d1 * d4 - d3 * d2
    vb = d5 * d2 - d1 * d6
    va = d3 * d6 - d5 * d4

    cond_a = (d1 <= 0.0) & (d2 <= 0.0)
    cond_b = (d3 >= 0.0) & (d4 <= d3)
    cond_c = (d6 >= 0.0) & (d5 <= d6)
    cond_ab = (vc <= 0.0) & (d1 >= 0.0) & (d3 <= 0.0)
    cond_ac = (vb <= 0.0) & (d2 >= 0.0) & (d6 <= 0.0)
    cond_bc = (va <= 0.0) & (d4 - d3 >= 0.0) & (d5 - d6 >= 0.0)

    with np.errstate(divide="ignore", invalid="ignore"):
        t_ab = d1 / (d1 - d3)
        t_ac = d2 / (d2 - d6)
        t_bc = (d4 - d3) / ((d4 - d3) + (d5 - d6))
        denom = va + vb + vc
        v_in = vb / denom
        w_in = vc / denom

        zeros = np.zeros_like(d1)
        ones = np.ones_like(d1)
        conds = [cond_a, cond_b, cond_c, cond_ab, cond_ac, cond_bc]
        bu = np.select(conds, [ones, zeros, zeros, 1.0 - t_ab, 1.0 - t_ac, zeros],
                       default=1.0 - v_in - w_in)
        bv = np.select(conds, [zeros, ones, zeros, t_ab, zeros, 1.0 - t_bc],
                       default=v_in)
        bw = np.select(conds, [zeros, zeros, ones, zeros, t_ac, t_bc],
                       default=w_in)

    cross = np.cross(ab, ac)
    degen = 0.5 * np.sqrt(_row_dot(cross, cross)) <= DEGENERATE_AREA
    degen = np.broadcast_to(degen, bu.shape)
    if np.any(degen):
        bu, bv, bw = _degenerate_bary(p, a, b, c, degen, bu, bv, bw)

    pos = bu[..., None] * a + bv[..., None] * b + bw[..., None] * c
    bary = np.stack([bu, bv, bw], axis=-1)
    return pos, bary


def _degenerate_bary(p, a, b, c, degen, bu, bv, bw):
    """Replace barycentric weights on degenerate lanes with the closest point
    on the longest edge (ties favor ab, then bc, then ca)."""
    full = degen.shape + (3,)
    pd = np.broadcast_to(p, full)[degen]
    ad = np.broadcast_to(a, full)[degen]
    bd = np.broadcast_to(b, full)[degen]
    cd = np.broadcast_to(c, full)[degen]
    lens = np.stack(
        [_row_dot(bd - ad, bd - ad), _row_dot(cd - bd, cd - bd), _row_dot(ad - cd, ad - cd)],
        axis=-1,
    )
    which = np.argmax(lens, axis=-1)
    _, t_ab = _closest_on_segment(pd, ad, bd)
    _, t_bc = _closest_on_segment(pd, bd, cd)
    _, t_ca = _closest_on_segment(pd, cd, ad)
    du = np.select([which == 0, which == 1], [1.0 - t_ab, np.zeros_like(t_ab)], default=t_ca)
    dv = np.select([which == 0, which == 1], [t_ab, 1.0 - t_bc], default=np.zeros_like(t_ab))
    dw = np.select([which == 0, which == 1], [np.zeros_like(t_ab), t_bc], default=1.0 - t_ca)
    bu = bu.copy()
    bv = bv.copy()
    bw = bw.copy()
    bu[degen] = du
    bv[degen] = dv
    bw[degen] = dw
    return bu, bv, bw


def closest_point_on_triangle(p, tri, face: int = 0) -> SurfacePoint:
    """Closest point on the closed triangle ``tri`` (three positions) to ``p``.

    Degenerate triangles fall back to the closest point on their longest
    edge. ``face`` only labels the returned SurfacePoint.
    """
    tri = np.asarray(tri, dtype=np.float64).reshape(3, 3)
    p = np.asarray(p, dtype=np.float64).reshape(3)
    pos, bary = _closest_point_kernel(
        p[None, :], tri[0][None, :], tri[1][None, :], tri[2][None, :]
    )
    return SurfacePoint(pos[0], face, bary[0])


def closest_points_on_surface(mesh: TriangleMesh, points):
    """Batched exact closest-surface-point query.

    Scans every face (vectorized, in query chunks sized to bound memory) and
    keeps, per query, the minimum squared distance with ties broken by lowest
    face index. Returns ``(positions, faces, bary, sq_dists)`` arrays.
    """
    if mesh.n_faces == 0:
        raise MeshValidationError("closest-point query requires a mesh with faces")
    pts = np.asarray(points, dtype=np.float64).reshape(-1, 3)
    va = mesh.vertices[mesh.faces[:, 0]]
    vb = mesh.vertices[mesh.faces[:, 1]]
    vc = mesh.vertices[mesh.faces[:, 2]]
    n = len(pts)
    m = mesh.n_faces
    out_pos = np.empty((n, 3))
    out_face = np.empty(n, dtype=np.int64)
    out_bary = np.empty((n, 3))
    out_d2 = np.empty(n)
    chunk = max(1, int(400_000 // max(m, 1)))
    for start in range(0, n, chunk):
        q = pts[start : start + chunk]
        pos, bary = _closest_point_kernel(
            q[:, None, :], va[None, :, :], vb[None, :, :], vc[None, :, :]
        )
        diff = pos - q[:, None, :]
        d2 = (diff * diff).sum(axis=-1)
        best = np.argmin(d2, axis=1)  # first minimum == lowest face index
        rows = np.arange(len(q))
        out_pos[start : start + chunk] = pos[rows, best]
        out_face[start : start + chunk] = best
        out_bary[start : start + chunk] = bary[rows, best]
        out_d2[start : start + chunk] = d2[rows, best]
    return out_pos, out_face, out_bary, out_d2


def closest_point_on_surface(mesh: TriangleMesh, p) -> SurfacePoint:
    """Globally closest point on the mesh surface to ``p`` (lowest face index
    wins ties)."""
    pos, face, bary, _ = closest_points_on_surface(mesh, np.asarray(p).reshape(1, 3))
    return SurfacePoint(pos[0], int(face[0]), bary[0])
