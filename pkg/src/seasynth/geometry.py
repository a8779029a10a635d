"""Triangle meshes, rigid poses and ray casting.

Meshes are immutable indexed triangle sets in meters. The world frame is
right-handed with +z up; mean sea level is z = 0. Poses apply uniform scale,
then an intrinsic yaw(Z) -> pitch(Y) -> roll(X) rotation, then translation.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
from scipy.spatial.transform import Rotation

from .errors import MeshParseError

TIE_EPS = 1e-12


@dataclass(frozen=True, eq=False)
class Mesh:
    """Indexed triangle mesh.

    ``vertices`` is an (N, 3) float array, ``triangles`` an (M, 3) int array of
    zero-based vertex indices. Both are copied and frozen on construction.
    """

    vertices: np.ndarray
    triangles: np.ndarray

    def __post_init__(self):
        v = np.array(self.vertices, dtype=np.float64).reshape(-1, 3)
        t = np.array(self.triangles, dtype=np.int64).reshape(-1, 3)
        if len(t) and (t.min() < 0 or t.max() >= len(v)):
            raise ValueError("triangle index out of range")
        if len(t) and np.any((t[:, 0] == t[:, 1]) | (t[:, 1] == t[:, 2]) | (t[:, 0] == t[:, 2])):
            raise ValueError("triangle with repeated vertex index")
        if not np.all(np.isfinite(v)):
            raise ValueError("non-finite vertex coordinate")
        v.flags.writeable = False
        t.flags.writeable = False
        object.__setattr__(self, "vertices", v)
        object.__setattr__(self, "triangles", t)

    @property
    def n_vertices(self) -> int:
        return len(self.vertices)

    @property
    def n_triangles(self) -> int:
        return len(self.triangles)

    @cached_property
    def bbox(self) -> tuple[np.ndarray, np.ndarray]:
        if self.n_vertices == 0:
            raise ValueError("empty mesh has no bounding box")
        lo = self.vertices.min(axis=0)
        hi = self.vertices.max(axis=0)
        lo.flags.writeable = False
        hi.flags.writeable = False
        return lo, hi

    @cached_property
    def _tri_cache(self):
        v = self.vertices
        t = self.triangles
        v0 = v[t[:, 0]]
        e1 = v[t[:, 1]] - v0
        e2 = v[t[:, 2]] - v0
        n = _cross(e1, e2)
        norm = np.sqrt(n[:, 0] * n[:, 0] + n[:, 1] * n[:, 1] + n[:, 2] * n[:, 2])
        valid = norm > 0.0
        unit = np.zeros_like(n)
        unit[valid] = n[valid] / norm[valid, None]
        return v0, e1, e2, unit, norm, valid

    def triangle_areas(self) -> np.ndarray:
        return 0.5 * self._tri_cache[4]

    def edges(self) -> np.ndarray:
        """Undirected edges, one row per triangle side, sorted per row."""
        t = self.triangles
        e = np.concatenate([t[:, [0, 1]], t[:, [1, 2]], t[:, [2, 0]]])
        return np.sort(e, axis=1)

    def is_watertight(self) -> bool:
        """True when every undirected edge is shared by exactly two triangles."""
        _, counts = np.unique(self.edges(), axis=0, return_counts=True)
        return bool(np.all(counts == 2))

    def __eq__(self, other):
        if not isinstance(other, Mesh):
            return NotImplemented
        return (np.array_equal(self.vertices, other.vertices)
                and np.array_equal(self.triangles, other.triangles))

    __hash__ = None


def _cross(a, b):
    return np.stack([
        a[..., 1] * b[..., 2] - a[..., 2] * b[..., 1],
        a[..., 2] * b[..., 0] - a[..., 0] * b[..., 2],
        a[..., 0] * b[..., 1] - a[..., 1] * b[..., 0],
    ], axis=-1)


# ---------------------------------------------------------------------------
# Mesh files
# ---------------------------------------------------------------------------

def parse_mesh(text: str) -> Mesh:
    """Parse a Wavefront-style mesh.

    Only ``v`` and ``f`` directives are interpreted; comments and every other
    directive (``vn``, ``vt``, ``o``, ``usemtl``...) are skipped. Faces with
    more than three corners are fan-triangulated from their first corner.
    Indices are 1-based; negative indices count back from the most recently
    declared vertex.
    """
    vertices: list[tuple[float, float, float]] = []
    triangles: list[tuple[int, int, int]] = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        tag = parts[0]
        if tag == "v":
            if len(parts) < 4:
                raise MeshParseError("vertex needs three coordinates", lineno)
            try:
                xyz = tuple(float(c) for c in parts[1:4])
            except ValueError:
                raise MeshParseError(f"non-numeric vertex coordinate in {raw.strip()!r}", lineno) from None
            if not all(math.isfinite(c) for c in xyz):
                raise MeshParseError("non-finite vertex coordinate", lineno)
            vertices.append(xyz)
        elif tag == "f":
            corners = []
            for token in parts[1:]:
                head = token.split("/", 1)[0]
                try:
                    idx = int(head)
                except ValueError:
                    raise MeshParseError(f"bad face index {token!r}", lineno) from None
                if idx > 0:
                    resolved = idx - 1
                elif idx < 0:
                    resolved = len(vertices) + idx
                else:
                    raise MeshParseError("face index 0 is invalid (indices are 1-based)", lineno)
                if not 0 <= resolved < len(vertices):
                    raise MeshParseError(f"face index {idx} out of range ({len(vertices)} vertices)", lineno)
                corners.append(resolved)
            if len(corners) < 3:
                raise MeshParseError("face needs at least three indices", lineno)
            if len(set(corners)) != len(corners):
                raise MeshParseError("face repeats a vertex index", lineno)
            for k in range(1, len(corners) - 1):
                triangles.append((corners[0], corners[k], corners[k + 1]))
    if not triangles:
        raise MeshParseError("empty mesh")
    return Mesh(np.array(vertices, dtype=np.float64), np.array(triangles, dtype=np.int64))


def format_mesh(mesh: Mesh) -> str:
    """Serialize to the same subset ``parse_mesh`` reads; floats round-trip exactly."""
    lines = [f"# {mesh.n_vertices} vertices, {mesh.n_triangles} triangles"]
    lines += [f"v {x!r} {y!r} {z!r}" for x, y, z in mesh.vertices.tolist()]
    lines += [f"f {a + 1} {b + 1} {c + 1}" for a, b, c in mesh.triangles.tolist()]
    return "\n".join(lines) + "\n"


def load_mesh(path) -> Mesh:
    with open(path, encoding="utf-8") as fh:
        return parse_mesh(fh.read())


# ---------------------------------------------------------------------------
# Built-in shapes
# ---------------------------------------------------------------------------

# Half-width of the body relative to body length, and vertical flattening.
_BODY_HALF_WIDTH = 0.11
_BODY_FLATTEN = 0.72
# Fraction of the length taken by the fluke behind the body's tail pole.
_FLUKE_FRACTION = 0.16
_FLUKE_THICKNESS = 0.015


def _ring_solid(xs, radii_y, radii_z, z_center, segments):
    """Closed surface of revolution-like solid: poles at xs[0] and xs[-1]."""
    verts = [(xs[0], 0.0, z_center)]
    ang = np.arange(segments) * (2.0 * np.pi / segments)
    c, s = np.cos(ang), np.sin(ang)
    for x, ry, rz in zip(xs[1:-1], radii_y[1:-1], radii_z[1:-1]):
        for k in range(segments):
            verts.append((x, ry * c[k], z_center + rz * s[k]))
    verts.append((xs[-1], 0.0, z_center))
    n_rings = len(xs) - 2
    tris = []
    tail, head = 0, len(verts) - 1

    def ring(i, k):
        return 1 + i * segments + (k % segments)

    for k in range(segments):
        tris.append((tail, ring(0, k + 1), ring(0, k)))
    for i in range(n_rings - 1):
        for k in range(segments):
            a, b = ring(i, k), ring(i, k + 1)
            c2, d = ring(i + 1, k), ring(i + 1, k + 1)
            tris.append((a, b, d))
            tris.append((a, d, c2))
    for k in range(segments):
        tris.append((head, ring(n_rings - 1, k), ring(n_rings - 1, k + 1)))
    return np.array(verts), np.array(tris)


def _prism(outline_xy, center, z_lo, z_hi):
    """Closed prism over an outline that is star-shaped about ``center``.

    The outline runs counter-clockwise seen from +z.
    """
    n = len(outline_xy)
    cx, cy = center
    verts = [(x, y, z_hi) for x, y in outline_xy] + [(x, y, z_lo) for x, y in outline_xy]
    verts += [(cx, cy, z_hi), (cx, cy, z_lo)]
    top_c, bot_c = 2 * n, 2 * n + 1
    tris = []
    for k in range(n):
        k1 = (k + 1) % n
        tris.append((top_c, k, k1))
        tris.append((bot_c, n + k1, n + k))
        tris.append((k, n + k, n + k1))
        tris.append((k, n + k1, k1))
    return np.array(verts), np.array(tris)


def parametric_whale(body_length: float = 15.0, fluke_span: float = 4.0,
                     segments: int = 14, stations: int = 14) -> Mesh:
    """Stylized whale: a flattened spindle body with a flat two-lobed fluke.

    The head points along +x. The mesh spans x in [-L/2, L/2] exactly and is
    made of two closed components (body and fluke), so every edge is shared
    by exactly two triangles.
    """
    if not body_length > 0 or not fluke_span > 0:
        raise ValueError("body_length and fluke_span must be positive")
    L = float(body_length)
    half = 0.5 * L
    tail_x = -half + _FLUKE_FRACTION * L
    # Body stations: cosine spacing packs rings near the rounded head.
    u = 0.5 - 0.5 * np.cos(np.linspace(0.0, np.pi, stations))
    xs = tail_x + u * (half - tail_x)
    # Thin peduncle at the tail, broad blunt head.
    profile = u ** 0.8 * (1.0 - u) ** 0.35
    profile = profile / profile.max()
    ry = _BODY_HALF_WIDTH * L * profile
    rz = _BODY_FLATTEN * ry
    body_v, body_t = _ring_solid(xs, ry, rz, 0.0, segments)

    s = 0.5 * fluke_span
    root = tail_x + 0.03 * L
    back = -half
    D = root - back
    upper = [(1.0, 0.0), (0.75, 0.35), (0.35, 1.0), (0.0, 0.85), (0.2, 0.35)]
    outline = [(back + fx * D, fy * s) for fx, fy in upper]
    outline.append((back + 0.1 * D, 0.0))
    outline += [(back + fx * D, -fy * s) for fx, fy in reversed(upper[1:])]
    h = 0.5 * _FLUKE_THICKNESS * L
    fluke_v, fluke_t = _prism(outline, (back + 0.5 * (root - back), 0.0), -h, h)
    verts = np.concatenate([body_v, fluke_v])
    tris = np.concatenate([body_t, fluke_t + len(body_v)])
    return Mesh(verts, tris)


def box(size=(1.0, 1.0, 1.0)) -> Mesh:
    """Axis-aligned box centered on the origin with outward-facing triangles."""
    sx, sy, sz = (0.5 * float(a) for a in size)
    if min(sx, sy, sz) <= 0:
        raise ValueError("box dimensions must be positive")
    v = np.array([[x, y, z] for z in (-sz, sz) for y in (-sy, sy) for x in (-sx, sx)])
    quads = [(0, 2, 3, 1), (4, 5, 7, 6), (0, 1, 5, 4), (2, 6, 7, 3), (0, 4, 6, 2), (1, 3, 7, 5)]
    tris = [(a, b, c) for a, b, c, d in quads] + [(a, c, d) for a, b, c, d in quads]
    return Mesh(v, np.array(tris))


def rock(radius: float = 2.0, roughness: float = 0.25, seed: int = 0, subdivisions: int = 2) -> Mesh:
    """Lumpy closed blob: an icosphere with hashed radial displacement per vertex."""
    from . import hashing

    if radius <= 0:
        raise ValueError("radius must be positive")
    t = (1.0 + 5.0 ** 0.5) / 2.0
    verts = [(-1, t, 0), (1, t, 0), (-1, -t, 0), (1, -t, 0), (0, -1, t), (0, 1, t),
             (0, -1, -t), (0, 1, -t), (t, 0, -1), (t, 0, 1), (-t, 0, -1), (-t, 0, 1)]
    faces = [(0, 11, 5), (0, 5, 1), (0, 1, 7), (0, 7, 10), (0, 10, 11), (1, 5, 9), (5, 11, 4),
             (11, 10, 2), (10, 7, 6), (7, 1, 8), (3, 9, 4), (3, 4, 2), (3, 2, 6), (3, 6, 8),
             (3, 8, 9), (4, 9, 5), (2, 4, 11), (6, 2, 10), (8, 6, 7), (9, 8, 1)]
    verts = [np.array(p, dtype=float) / np.linalg.norm(p) for p in verts]
    for _ in range(subdivisions):
        cache: dict[tuple[int, int], int] = {}

        def mid(a, b):
            k = (min(a, b), max(a, b))
            if k not in cache:
                m = verts[a] + verts[b]
                verts.append(m / np.linalg.norm(m))
                cache[k] = len(verts) - 1
            return cache[k]

        new = []
        for a, b, c in faces:
            ab, bc, ca = mid(a, b), mid(b, c), mid(c, a)
            new += [(a, ab, ca), (b, bc, ab), (c, ca, bc), (ab, bc, ca)]
        faces = new
    v = np.array(verts)
    bump = hashing.uniform(seed, np.arange(len(v)), hashing.name_id("rock"))
    r = radius * (1.0 + roughness * (2.0 * bump - 1.0))
    return Mesh(v * r[:, None], np.array(faces))


# ---------------------------------------------------------------------------
# Poses
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Pose:
    """Rigid pose with uniform scale. Angles in radians, translation in meters."""

    yaw: float = 0.0
    pitch: float = 0.0
    roll: float = 0.0
    translation: tuple[float, float, float] = (0.0, 0.0, 0.0)
    scale: float = 1.0

    def __post_init__(self):
        if not self.scale > 0:
            raise ValueError(f"pose scale must be positive, got {self.scale}")
        object.__setattr__(self, "translation", tuple(float(c) for c in self.translation))
        if len(self.translation) != 3:
            raise ValueError("translation must have three components")

    def rotation_matrix(self) -> np.ndarray:
        return Rotation.from_euler("ZYX", [self.yaw, self.pitch, self.roll]).as_matrix()

    def inverse(self) -> "Pose":
        r_inv = self.rotation_matrix().T
        yaw, pitch, roll = Rotation.from_matrix(r_inv).as_euler("ZYX")
        t = -(r_inv @ np.asarray(self.translation)) / self.scale
        return Pose(float(yaw), float(pitch), float(roll), tuple(t.tolist()), 1.0 / self.scale)

    def to_dict(self) -> dict:
        return {"yaw": self.yaw, "pitch": self.pitch, "roll": self.roll,
                "translation": list(self.translation), "scale": self.scale}


def transform_points(points: np.ndarray, pose: Pose) -> np.ndarray:
    p = np.asarray(points, dtype=np.float64) * pose.scale
    r = pose.rotation_matrix()
    # Written out rather than ``p @ r.T`` so results do not depend on BLAS kernels.
    out = np.empty_like(p)
    for i in range(3):
        out[:, i] = p[:, 0] * r[i, 0] + p[:, 1] * r[i, 1] + p[:, 2] * r[i, 2] + pose.translation[i]
    return out


def apply_pose(mesh: Mesh, pose: Pose) -> Mesh:
    return Mesh(transform_points(mesh.vertices, pose), mesh.triangles)


# ---------------------------------------------------------------------------
# Ray casting
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Ray:
    origin: tuple[float, float, float]
    direction: tuple[float, float, float]

    def __post_init__(self):
        d = np.asarray(self.direction, dtype=np.float64)
        if abs(float(np.linalg.norm(d)) - 1.0) > 1e-9:
            raise ValueError("ray direction must be a unit vector")

    @classmethod
    def towards(cls, origin, direction) -> "Ray":
        d = np.asarray(direction, dtype=np.float64)
        return cls(tuple(map(float, origin)), tuple((d / np.linalg.norm(d)).tolist()))


@dataclass(frozen=True)
class Hit:
    t: float
    normal: tuple[float, float, float]
    object_id: int = 0
    triangle: int = field(default=-1, compare=False)


def ray_box_mask(origins, directions, lo, hi) -> np.ndarray:
    """Slab test: which rays touch the closed box [lo, hi] at some t >= 0."""
    with np.errstate(divide="ignore", invalid="ignore"):
        inv = 1.0 / directions
        t1 = (lo - origins) * inv
        t2 = (hi - origins) * inv
    # A zero direction component yields nan when the origin sits on a slab
    # face; such rays stay inside that slab for every t.
    t1 = np.where(np.isnan(t1), -np.inf, t1)
    t2 = np.where(np.isnan(t2), np.inf, t2)
    tnear = np.minimum(t1, t2).max(axis=1)
    tfar = np.maximum(t1, t2).min(axis=1)
    return (tfar >= tnear) & (tfar >= 0.0)


def intersect_rays(origins, directions, mesh: Mesh, use_bbox: bool = True, chunk: int = 256):
    """Nearest hit of many rays against one mesh.

    Returns ``(t, triangle, normal)``: ``t`` is +inf and ``triangle`` -1 for
    misses; ``normal`` is the unit geometric normal turned to face the ray.
    """
    origins = np.asarray(origins, dtype=np.float64).reshape(-1, 3)
    directions = np.asarray(directions, dtype=np.float64).reshape(-1, 3)
    n = len(origins)
    t_out = np.full(n, np.inf)
    idx_out = np.full(n, -1, dtype=np.int64)
    normal_out = np.zeros((n, 3))
    if n == 0 or mesh.n_triangles == 0:
        return t_out, idx_out, normal_out

    if use_bbox:
        lo, hi = mesh.bbox
        candidates = np.flatnonzero(ray_box_mask(origins, directions, lo, hi))
    else:
        candidates = np.arange(n)
    v0, e1, e2, unit_n, area2, valid = mesh._tri_cache
    tri_ids = np.flatnonzero(valid)
    if len(candidates) == 0 or len(tri_ids) == 0:
        return t_out, idx_out, normal_out
    v0, e1, e2, area2 = v0[tri_ids], e1[tri_ids], e2[tri_ids], area2[tri_ids]
    e1x, e1y, e1z = e1[:, 0], e1[:, 1], e1[:, 2]
    e2x, e2y, e2z = e2[:, 0], e2[:, 1], e2[:, 2]
    v0x, v0y, v0z = v0[:, 0], v0[:, 1], v0[:, 2]
    det_eps = 1e-12 * area2

    step = max(1, int(chunk * 1024 // max(len(tri_ids), 1)))
    for start in range(0, len(candidates), step):
        rows = candidates[start:start + step]
        o = origins[rows]
        d = directions[rows]
        dx, dy, dz = d[:, 0:1], d[:, 1:2], d[:, 2:3]
        # Moller-Trumbore, componentwise so every ray is computed identically
        # regardless of how rays are batched.
        px = dy * e2z - dz * e2y
        py = dz * e2x - dx * e2z
        pz = dx * e2y - dy * e2x
        det = e1x * px + e1y * py + e1z * pz
        ok = np.abs(det) > det_eps
        inv_det = np.divide(1.0, det, out=np.zeros_like(det), where=ok)
        sx = o[:, 0:1] - v0x
        sy = o[:, 1:2] - v0y
        sz = o[:, 2:3] - v0z
        u = (sx * px + sy * py + sz * pz) * inv_det
        qx = sy * e1z - sz * e1y
        qy = sz * e1x - sx * e1z
        qz = sx * e1y - sy * e1x
        v = (dx * qx + dy * qy + dz * qz) * inv_det
        t = (e2x * qx + e2y * qy + e2z * qz) * inv_det
        ok &= (u >= 0.0) & (v >= 0.0) & (u + v <= 1.0) & (t >= 0.0)
        t = np.where(ok, t, np.inf)
        tmin = t.min(axis=1)
        hit = np.isfinite(tmin)
        if not hit.any():
            continue
        # Lowest triangle index among hits within TIE_EPS of the nearest.
        first = np.argmax(t <= (tmin + TIE_EPS)[:, None], axis=1)
        r_hit = rows[hit]
        t_out[r_hit] = tmin[hit]
        idx_out[r_hit] = tri_ids[first[hit]]

    hit_rows = np.flatnonzero(idx_out >= 0)
    if len(hit_rows):
        nrm = unit_n[idx_out[hit_rows]]
        d = directions[hit_rows]
        facing = nrm[:, 0] * d[:, 0] + nrm[:, 1] * d[:, 1] + nrm[:, 2] * d[:, 2]
        normal_out[hit_rows] = np.where(facing[:, None] > 0.0, -nrm, nrm)
    return t_out, idx_out, normal_out


def intersect(ray: Ray, mesh: Mesh, object_id: int = 0, use_bbox: bool = True) -> Hit | None:
    """Nearest intersection of ``ray`` with ``mesh``, or None on a miss."""
    t, tri, nrm = intersect_rays([ray.origin], [ray.direction], mesh, use_bbox=use_bbox)
    if tri[0] < 0:
        return None
    return Hit(float(t[0]), tuple(nrm[0].tolist()), object_id, int(tri[0]))
